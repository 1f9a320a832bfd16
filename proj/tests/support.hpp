#pragma once
// Shared helpers for the unit and acceptance tests: scratch directories,
// random generators, and reference implementations used as oracles.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "item/classifier.hpp"
#include "item/error.hpp"
#include "item/metrics.hpp"
#include "item/representation.hpp"

namespace item::testing {

// Error code thrown by f, or nullopt if it returned normally.
template <typename F>
std::optional<ErrorCode> code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        const auto base = std::filesystem::temp_directory_path();
        for (;;) {
            path_ = base / ("item-test-" + std::to_string(rd()) + std::to_string(rd()));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<double> random_vector(std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(dim);
    for (auto& x : v) x = n(rng);
    return v;
}

inline Embedding random_embedding(std::size_t dim, std::mt19937_64& rng) {
    for (;;) {
        auto v = random_vector(dim, rng);
        if (l2_norm(v) > 1e-3) return Embedding(std::move(v));
    }
}

inline Misalignment random_misalignment(std::size_t dim, std::mt19937_64& rng) {
    return misalignment(random_embedding(dim, rng), random_embedding(dim, rng));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Plain-loop cosine, independent of the library's normalization path.
inline double naive_cosine(std::span<const double> a, std::span<const double> b) {
    long double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += static_cast<long double>(a[i]) * b[i];
        aa += static_cast<long double>(a[i]) * a[i];
        bb += static_cast<long double>(b[i]) * b[i];
    }
    return static_cast<double>(ab / std::sqrt(aa * bb));
}

// AP by pairwise comparison: for each positive p, the retrieved set is every
// sample ranked at or above p (higher score, or equal score and id <= p.id).
inline double brute_force_ap(const std::vector<ScoredSample>& s) {
    double sum = 0.0;
    std::size_t positives = 0;
    for (const auto& p : s) {
        if (p.label != Label::fake) continue;
        ++positives;
        std::size_t retrieved = 0, hits = 0;
        for (const auto& q : s) {
            const bool above = q.score > p.score || (q.score == p.score && q.id <= p.id);
            if (!above) continue;
            ++retrieved;
            if (q.label == Label::fake) ++hits;
        }
        sum += static_cast<double>(hits) / static_cast<double>(retrieved);
    }
    return sum / static_cast<double>(positives);
}

inline std::vector<double*> parameters(MlpHead& h) {
    std::vector<double*> out;
    for (auto& v : h.w1) out.push_back(&v);
    for (auto& v : h.b1) out.push_back(&v);
    for (auto& v : h.w2) out.push_back(&v);
    for (auto& v : h.b2) out.push_back(&v);
    return out;
}

inline std::vector<double> flatten(const MlpHead& h) {
    std::vector<double> out;
    out.insert(out.end(), h.w1.begin(), h.w1.end());
    out.insert(out.end(), h.b1.begin(), h.b1.end());
    out.insert(out.end(), h.w2.begin(), h.w2.end());
    out.insert(out.end(), h.b2.begin(), h.b2.end());
    return out;
}

// Random head with small biases and a batch whose hidden pre-activations all
// stay at least `margin` away from the ReLU kink, so central differences with
// step 1e-5 never straddle it.
struct GradientInstance {
    MlpHead head;
    std::vector<Example> batch;
};

inline GradientInstance random_gradient_instance(std::size_t dim, std::size_t hidden, std::size_t n,
                                                 std::mt19937_64& rng, double margin = 1e-3) {
    for (;;) {
        GradientInstance g;
        g.head = init_head(dim, hidden, rng());
        std::normal_distribution<double> nb(0.0, 0.1);
        for (auto& b : g.head.b1) b = nb(rng);
        for (auto& b : g.head.b2) b = nb(rng);
        std::bernoulli_distribution coin(0.5);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            Example ex{random_misalignment(dim, rng), coin(rng) ? Label::fake : Label::real};
            for (std::size_t j = 0; j < hidden; ++j) {
                double z = g.head.b1[j];
                for (std::size_t k = 0; k < dim; ++k) z += g.head.w1[j * dim + k] * ex.d[k];
                if (std::abs(z) < margin) ok = false;
            }
            g.batch.push_back(std::move(ex));
        }
        if (ok) return g;
    }
}

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, floor)
// using central differences. The floor keeps round-off in the difference
// quotient (about 1e-10 here) from dominating near-zero gradients.
inline double gradient_check(const MlpHead& head, const std::vector<Example>& batch, double step = 1e-5,
                             double floor = 1e-6) {
    const MlpHead analytic = gradients(head, batch);
    const auto flat = flatten(analytic);
    MlpHead probe = head;
    auto ps = parameters(probe);
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double keep = *ps[i];
        *ps[i] = keep + step;
        const double up = batch_loss(probe, batch);
        *ps[i] = keep - step;
        const double down = batch_loss(probe, batch);
        *ps[i] = keep;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(flat[i]), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(flat[i] - numeric) / denom);
    }
    return worst;
}

// Two isotropic Gaussian blobs in `dim` dimensions whose centers are
// `separation` standard deviations apart.
inline std::vector<Example> gaussian_blobs(std::size_t dim, std::size_t per_class, double separation,
                                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> dir(dim);
    for (auto& v : dir) v = n(rng);
    const double len = l2_norm(dir);
    for (auto& v : dir) v /= len;
    std::vector<Example> out;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const bool fake = i % 2 == 1;
        std::vector<double> x(dim);
        for (std::size_t k = 0; k < dim; ++k) x[k] = n(rng) + (fake ? 0.5 : -0.5) * separation * dir[k];
        out.push_back({Misalignment(std::move(x), MisalignmentKind::combined), fake ? Label::fake : Label::real});
    }
    return out;
}

// Full-batch gradient-descent logistic regression; returns training accuracy.
inline double logistic_regression_accuracy(const std::vector<Example>& data, std::size_t iters = 500,
                                           double lr = 0.1) {
    const std::size_t dim = data.front().d.dim();
    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        std::vector<double> gw(dim, 0.0);
        double gb = 0.0;
        for (const auto& ex : data) {
            double z = b;
            for (std::size_t k = 0; k < dim; ++k) z += w[k] * ex.d[k];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double err = p - (ex.label == Label::fake ? 1.0 : 0.0);
            for (std::size_t k = 0; k < dim; ++k) gw[k] += err * ex.d[k];
            gb += err;
        }
        const double scale = lr / static_cast<double>(data.size());
        for (std::size_t k = 0; k < dim; ++k) w[k] -= scale * gw[k];
        b -= scale * gb;
    }
    std::size_t correct = 0;
    for (const auto& ex : data) {
        double z = b;
        for (std::size_t k = 0; k < dim; ++k) z += w[k] * ex.d[k];
        correct += (z >= 0.0) == (ex.label == Label::fake);
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline double training_accuracy(const MlpHead& head, const std::vector<Example>& data) {
    std::size_t correct = 0;
    for (const auto& ex : data) correct += predict(head, ex.d).label == ex.label;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace item::testing
