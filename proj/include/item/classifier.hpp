#pragma once
// Two-layer MLP head over misalignment vectors, trained with binary
// cross-entropy (summed over the mini-batch) and AdamW.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "item/error.hpp"
#include "item/representation.hpp"

namespace item {

enum class Label : std::uint8_t { real = 0, fake = 1 };

inline std::string_view to_string(Label l) noexcept { return l == Label::fake ? "fake" : "real"; }

struct Example {
    Misalignment d;
    Label label = Label::real;
};

// hidden = relu(W1 x + b1); logits = W2 hidden + b2. Matrices are row-major.
struct MlpHead {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::vector<double> w1;  // hidden_dim x input_dim
    std::vector<double> b1;  // hidden_dim
    std::vector<double> w2;  // 2 x hidden_dim
    std::array<double, 2> b2{0.0, 0.0};

    static MlpHead zeros(std::size_t input_dim, std::size_t hidden_dim) {
        MlpHead h;
        h.input_dim = input_dim;
        h.hidden_dim = hidden_dim;
        h.w1.assign(hidden_dim * input_dim, 0.0);
        h.b1.assign(hidden_dim, 0.0);
        h.w2.assign(2 * hidden_dim, 0.0);
        return h;
    }

    std::size_t parameter_count() const noexcept {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }

    bool all_finite() const noexcept {
        auto fin = [](double v) { return std::isfinite(v); };
        return std::all_of(w1.begin(), w1.end(), fin) && std::all_of(b1.begin(), b1.end(), fin) &&
               std::all_of(w2.begin(), w2.end(), fin) && std::all_of(b2.begin(), b2.end(), fin);
    }

    friend bool operator==(const MlpHead&, const MlpHead&) = default;
};

struct TrainConfig {
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    double weight_decay = 1e-3;
    std::size_t batch_size = 64;
    std::size_t hidden_dim = 256;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (epochs < 1) fail(ErrorCode::InvalidConfig, "epochs must be >= 1");
        if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidConfig, "learning_rate must be > 0");
        if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
        if (hidden_dim < 1) fail(ErrorCode::InvalidConfig, "hidden_dim must be >= 1");
        if (!(weight_decay >= 0.0)) fail(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            fail(ErrorCode::InvalidConfig, "betas must lie in [0, 1)");
        }
        if (!(eps > 0.0)) fail(ErrorCode::InvalidConfig, "eps must be > 0");
    }
};

struct Prediction {
    double prob_real = 0.5;
    double prob_fake = 0.5;
    Label label = Label::fake;
};

inline constexpr double kDecisionThreshold = 0.5;
inline constexpr double kLogFloor = 1e-12;

// Ties at the threshold go to fake.
inline Label classify(double prob_fake, double threshold = kDecisionThreshold) noexcept {
    return prob_fake >= threshold ? Label::fake : Label::real;
}

inline MlpHead init_head(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1) fail(ErrorCode::InvalidConfig, "head dims must be >= 1");
    MlpHead h = MlpHead::zeros(input_dim, hidden_dim);
    std::mt19937_64 rng(seed);
    const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
    std::uniform_real_distribution<double> u1(-a1, a1);
    for (double& w : h.w1) w = u1(rng);
    const double a2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + 2));
    std::uniform_real_distribution<double> u2(-a2, a2);
    for (double& w : h.w2) w = u2(rng);
    return h;
}

namespace detail {

// Four independent accumulators; the summation order is fixed so results
// stay bit-reproducible.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

struct ForwardState {
    std::vector<double> pre;     // W1 x + b1
    std::vector<double> hidden;  // relu(pre)
    std::array<double, 2> logits{};
    std::array<double, 2> probs{};
    std::array<double, 2> log_probs{};
};

inline void forward_into(const MlpHead& h, const double* x, ForwardState& st) {
    st.pre.resize(h.hidden_dim);
    st.hidden.resize(h.hidden_dim);
    for (std::size_t j = 0; j < h.hidden_dim; ++j) {
        const double p = dot(&h.w1[j * h.input_dim], x, h.input_dim) + h.b1[j];
        st.pre[j] = p;
        st.hidden[j] = p > 0.0 ? p : 0.0;
    }
    for (std::size_t k = 0; k < 2; ++k) {
        st.logits[k] = dot(&h.w2[k * h.hidden_dim], st.hidden.data(), h.hidden_dim) + h.b2[k];
    }
    const double m = std::max(st.logits[0], st.logits[1]);
    const double e0 = std::exp(st.logits[0] - m);
    const double e1 = std::exp(st.logits[1] - m);
    const double z = e0 + e1;
    st.probs = {e0 / z, e1 / z};
    const double lz = std::log(z);
    st.log_probs = {st.logits[0] - m - lz, st.logits[1] - m - lz};
}

inline void check_dim(const MlpHead& h, std::size_t dim) {
    if (dim != h.input_dim) {
        fail(ErrorCode::DimensionMismatch, "head expects dim " + std::to_string(h.input_dim) +
                                               ", got " + std::to_string(dim));
    }
}

// BCE on prob_fake, which is the negative log-probability of the true class.
// Returns the loss term and whether the floor was active.
inline double sample_loss(const ForwardState& st, Label y, bool* floored = nullptr) {
    const std::size_t t = static_cast<std::size_t>(y);
    const double log_floor = std::log(kLogFloor);
    const bool clipped = st.log_probs[t] < log_floor;
    if (floored) *floored = clipped;
    return -(clipped ? log_floor : st.log_probs[t]);
}

// Adds d(loss_i)/d(params) for one sample into `g`; returns loss_i.
inline double accumulate_sample(const MlpHead& h, const double* x, Label y, ForwardState& st,
                                std::vector<double>& dh, MlpHead& g) {
    forward_into(h, x, st);
    bool floored = false;
    const double loss = sample_loss(st, y, &floored);
    if (floored) return loss;  // locally constant

    const std::size_t t = static_cast<std::size_t>(y);
    std::array<double, 2> dz{st.probs[0], st.probs[1]};
    dz[t] -= 1.0;

    g.b2[0] += dz[0];
    g.b2[1] += dz[1];
    dh.assign(h.hidden_dim, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
        double* gw2 = &g.w2[k * h.hidden_dim];
        const double* w2 = &h.w2[k * h.hidden_dim];
        for (std::size_t j = 0; j < h.hidden_dim; ++j) {
            gw2[j] += dz[k] * st.hidden[j];
            dh[j] += dz[k] * w2[j];
        }
    }
    for (std::size_t j = 0; j < h.hidden_dim; ++j) {
        if (!(st.pre[j] > 0.0)) continue;
        const double dp = dh[j];
        g.b1[j] += dp;
        double* gw1 = &g.w1[j * h.input_dim];
        for (std::size_t i = 0; i < h.input_dim; ++i) gw1[i] += dp * x[i];
    }
    return loss;
}

}  // namespace detail

inline Prediction forward(const MlpHead& head, const Misalignment& d) {
    detail::check_dim(head, d.dim());
    detail::ForwardState st;
    detail::forward_into(head, d.values().data(), st);
    return Prediction{st.probs[0], st.probs[1], classify(st.probs[1])};
}

inline Prediction predict(const MlpHead& head, const Misalignment& d) { return forward(head, d); }

inline double batch_loss(const MlpHead& head, std::span<const Example> batch) {
    if (batch.empty()) fail(ErrorCode::EmptyBatch, "batch is empty");
    detail::ForwardState st;
    double total = 0.0;
    for (const auto& ex : batch) {
        detail::check_dim(head, ex.d.dim());
        detail::forward_into(head, ex.d.values().data(), st);
        total += detail::sample_loss(st, ex.label);
    }
    return total;
}

inline MlpHead gradients(const MlpHead& head, std::span<const Example> batch) {
    if (batch.empty()) fail(ErrorCode::EmptyBatch, "batch is empty");
    MlpHead g = MlpHead::zeros(head.input_dim, head.hidden_dim);
    detail::ForwardState st;
    std::vector<double> dh;
    for (const auto& ex : batch) {
        detail::check_dim(head, ex.d.dim());
        detail::accumulate_sample(head, ex.d.values().data(), ex.label, st, dh, g);
    }
    return g;
}

// AdamW with decoupled weight decay on the weight matrices only.
class AdamW {
public:
    AdamW(const MlpHead& shape, const TrainConfig& cfg)
        : cfg_(cfg),
          m_(MlpHead::zeros(shape.input_dim, shape.hidden_dim)),
          v_(MlpHead::zeros(shape.input_dim, shape.hidden_dim)) {}

    void step(MlpHead& p, const MlpHead& g) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        update(p.w1, g.w1, m_.w1, v_.w1, bc1, bc2, true);
        update(p.b1, g.b1, m_.b1, v_.b1, bc1, bc2, false);
        update(p.w2, g.w2, m_.w2, v_.w2, bc1, bc2, true);
        update(p.b2, g.b2, m_.b2, v_.b2, bc1, bc2, false);
    }

    std::uint64_t steps() const noexcept { return t_; }

private:
    template <typename Vec>
    void update(Vec& p, const Vec& g, Vec& m, Vec& v, double bc1, double bc2, bool decay) const {
        const double lr = cfg_.learning_rate;
        const double b1 = cfg_.beta1;
        const double b2 = cfg_.beta2;
        const double shrink = decay ? 1.0 - lr * cfg_.weight_decay : 1.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] = p[i] * shrink - lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }

    TrainConfig cfg_;
    MlpHead m_;
    MlpHead v_;
    std::uint64_t t_ = 0;
};

// Called after every epoch with the 1-based epoch number and the current head.
using EpochObserver = std::function<void(std::size_t, const MlpHead&)>;

inline MlpHead train(std::span<const Example> dataset, const TrainConfig& cfg,
                     const EpochObserver& on_epoch = {}) {
    cfg.validate();
    if (dataset.empty()) fail(ErrorCode::EmptyDataset, "training set is empty");
    const std::size_t dim = dataset.front().d.dim();
    for (const auto& ex : dataset) {
        if (ex.d.dim() != dim) fail(ErrorCode::DimensionMismatch, "training set has mixed dims");
    }

    MlpHead head = init_head(dim, cfg.hidden_dim, cfg.seed);
    AdamW opt(head, cfg);
    // Shuffling uses its own stream so it does not depend on how many draws init took.
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    MlpHead grad = MlpHead::zeros(dim, cfg.hidden_dim);
    detail::ForwardState st;
    std::vector<double> dh;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::fill(grad.w1.begin(), grad.w1.end(), 0.0);
            std::fill(grad.b1.begin(), grad.b1.end(), 0.0);
            std::fill(grad.w2.begin(), grad.w2.end(), 0.0);
            grad.b2 = {0.0, 0.0};
            double loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const Example& ex = dataset[order[k]];
                loss += detail::accumulate_sample(head, ex.d.values().data(), ex.label, st, dh, grad);
            }
            if (!std::isfinite(loss)) {
                fail(ErrorCode::NonFiniteLoss, "loss became non-finite in epoch " +
                                                   std::to_string(epoch));
            }
            opt.step(head, grad);
        }
        if (on_epoch) on_epoch(epoch, head);
    }
    return head;
}

}  // namespace item
