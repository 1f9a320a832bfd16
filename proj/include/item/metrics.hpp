#pragma once
// Detection metrics over scored samples; fake is the positive class.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "item/classifier.hpp"
#include "item/error.hpp"

namespace item {

struct ScoredSample {
    std::string id;
    double score = 0.0;  // prob_fake
    Label label = Label::real;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct MetricsReport {
    double acc = 0.0;
    double ap = 0.0;
    std::size_t n_real = 0;
    std::size_t n_fake = 0;
    std::vector<PrPoint> pr_points;
};

namespace detail {

inline void check_scores(std::span<const ScoredSample> samples) {
    if (samples.empty()) fail(ErrorCode::EmptyInput, "no scored samples");
    for (const auto& s : samples) {
        if (!std::isfinite(s.score)) fail(ErrorCode::InvalidInput, "non-finite score for " + s.id);
    }
}

inline std::size_t count_fakes(std::span<const ScoredSample> samples) {
    return static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(), [](const ScoredSample& s) { return s.label == Label::fake; }));
}

// Score descending, id ascending among ties.
inline std::vector<const ScoredSample*> ranked(std::span<const ScoredSample> samples) {
    std::vector<const ScoredSample*> order;
    order.reserve(samples.size());
    for (const auto& s : samples) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const ScoredSample* a, const ScoredSample* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->id < b->id;
    });
    return order;
}

}  // namespace detail

inline double accuracy(std::span<const ScoredSample> samples, double threshold = kDecisionThreshold) {
    detail::check_scores(samples);
    std::size_t correct = 0;
    for (const auto& s : samples) {
        if (classify(s.score, threshold) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// Mean of precision@k over the ranks k at which a fake appears.
inline double average_precision(std::span<const ScoredSample> samples) {
    detail::check_scores(samples);
    const std::size_t positives = detail::count_fakes(samples);
    if (positives == 0) fail(ErrorCode::NoPositives, "average precision needs at least one fake");
    const auto order = detail::ranked(samples);
    double sum = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (order[k]->label == Label::fake) {
            ++tp;
            sum += static_cast<double>(tp) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(positives);
}

// One point per distinct score, thresholds descending, so recall never decreases.
inline std::vector<PrPoint> pr_curve(std::span<const ScoredSample> samples) {
    detail::check_scores(samples);
    const std::size_t positives = detail::count_fakes(samples);
    if (positives == 0) fail(ErrorCode::NoPositives, "PR curve needs at least one fake");
    const auto order = detail::ranked(samples);
    std::vector<PrPoint> points;
    std::size_t tp = 0;
    std::size_t k = 0;
    while (k < order.size()) {
        const double s = order[k]->score;
        for (; k < order.size() && order[k]->score == s; ++k) {
            if (order[k]->label == Label::fake) ++tp;
        }
        points.push_back({static_cast<double>(tp) / static_cast<double>(positives),
                          static_cast<double>(tp) / static_cast<double>(k)});
    }
    return points;
}

inline MetricsReport evaluate_scores(std::span<const ScoredSample> samples,
                                     double threshold = kDecisionThreshold) {
    MetricsReport r;
    r.acc = accuracy(samples, threshold);
    r.n_fake = detail::count_fakes(samples);
    r.n_real = samples.size() - r.n_fake;
    r.ap = average_precision(samples);
    r.pr_points = pr_curve(samples);
    return r;
}

}  // namespace item
