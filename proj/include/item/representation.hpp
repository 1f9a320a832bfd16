#pragma once
// Image-text misalignment in a joint embedding space.
//
// A misalignment vector is the difference of the L2-normalized image and text
// embeddings. Global distances compare the whole image with its full caption,
// local distances compare an object crop with its caption phrase, and the
// final representation is a weighted sum of the global and the mean local
// distance.
//
// Everything here is a pure function on doubles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "item/error.hpp"

namespace item {

inline constexpr double kNormEpsilon = 1e-12;

class Embedding {
public:
    Embedding() = default;

    explicit Embedding(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) fail(ErrorCode::InvalidInput, "embedding must have dim >= 1");
        for (double v : values_) {
            if (!std::isfinite(v)) fail(ErrorCode::InvalidInput, "embedding has non-finite entry");
        }
    }

    // Providers frequently deliver single precision; widen once here.
    static Embedding from_floats(std::span<const float> values) {
        return Embedding(std::vector<double>(values.begin(), values.end()));
    }

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    std::vector<double> values_;
};

enum class MisalignmentKind { global, local_single, local_mean, combined };

inline std::string_view to_string(MisalignmentKind k) noexcept {
    switch (k) {
        case MisalignmentKind::global: return "global";
        case MisalignmentKind::local_single: return "local_single";
        case MisalignmentKind::local_mean: return "local_mean";
        case MisalignmentKind::combined: return "combined";
    }
    return "?";
}

class Misalignment {
public:
    Misalignment() = default;
    Misalignment(std::vector<double> values, MisalignmentKind kind)
        : values_(std::move(values)), kind_(kind) {}

    static Misalignment zeros(std::size_t dim, MisalignmentKind kind) {
        return Misalignment(std::vector<double>(dim, 0.0), kind);
    }

    std::size_t dim() const noexcept { return values_.size(); }
    MisalignmentKind kind() const noexcept { return kind_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    double norm() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return std::sqrt(s);
    }

    friend bool operator==(const Misalignment&, const Misalignment&) = default;

private:
    std::vector<double> values_;
    MisalignmentKind kind_ = MisalignmentKind::global;
};

enum class FusionMode { global_only, local_only, both };
enum class EmptyObjectPolicy { zero_local, skip_sample };

struct FusionConfig {
    double w1 = 1.0;
    double w2 = 1.0;
    FusionMode mode = FusionMode::both;
    EmptyObjectPolicy empty_object_policy = EmptyObjectPolicy::zero_local;

    void validate() const {
        if (!std::isfinite(w1) || !std::isfinite(w2)) {
            fail(ErrorCode::InvalidConfig, "fusion weights must be finite");
        }
        if (mode == FusionMode::both && w1 == 0.0 && w2 == 0.0) {
            fail(ErrorCode::InvalidConfig, "mode=both needs a nonzero fusion weight");
        }
    }

    // Weights after the mode override.
    double effective_w1() const noexcept { return mode == FusionMode::local_only ? 0.0 : w1; }
    double effective_w2() const noexcept { return mode == FusionMode::global_only ? 0.0 : w2; }
};

inline double l2_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline Embedding l2_normalize(const Embedding& v) {
    const double n = l2_norm(v.values());
    if (!(n > kNormEpsilon)) fail(ErrorCode::ZeroNormEmbedding, "embedding norm is zero");
    std::vector<double> out(v.dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] / n;
    return Embedding(std::move(out));
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        fail(ErrorCode::DimensionMismatch,
             "cosine of dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    }
    const double na = l2_norm(a.values());
    const double nb = l2_norm(b.values());
    if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
        fail(ErrorCode::ZeroNormEmbedding, "embedding norm is zero");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

namespace detail {

inline Misalignment difference_of_units(const Embedding& image, const Embedding& text,
                                        MisalignmentKind kind) {
    if (image.dim() != text.dim()) {
        fail(ErrorCode::DimensionMismatch, "image dim " + std::to_string(image.dim()) +
                                               " vs text dim " + std::to_string(text.dim()));
    }
    const double ni = l2_norm(image.values());
    const double nt = l2_norm(text.values());
    if (!(ni > kNormEpsilon)) fail(ErrorCode::ZeroNormEmbedding, "image embedding norm is zero");
    if (!(nt > kNormEpsilon)) fail(ErrorCode::ZeroNormEmbedding, "text embedding norm is zero");
    std::vector<double> d(image.dim());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = image[i] / ni - text[i] / nt;
    return Misalignment(std::move(d), kind);
}

}  // namespace detail

inline Misalignment misalignment(const Embedding& image_emb, const Embedding& text_emb) {
    return detail::difference_of_units(image_emb, text_emb, MisalignmentKind::global);
}

inline Misalignment global_distance(const Embedding& whole_image_emb,
                                    const Embedding& full_caption_emb) {
    return detail::difference_of_units(whole_image_emb, full_caption_emb,
                                       MisalignmentKind::global);
}

inline Misalignment local_distance(const Embedding& object_image_emb,
                                   const Embedding& object_phrase_emb) {
    return detail::difference_of_units(object_image_emb, object_phrase_emb,
                                       MisalignmentKind::local_single);
}

// Uniform mean of per-object distances. `dim` is only consulted for an empty
// list under the zero_local policy.
inline Misalignment average_local(std::span<const Misalignment> locals,
                                  EmptyObjectPolicy policy, std::size_t dim) {
    if (locals.empty()) {
        if (policy == EmptyObjectPolicy::skip_sample) {
            fail(ErrorCode::EmptyObjectSet, "no objects detected");
        }
        return Misalignment::zeros(dim, MisalignmentKind::local_mean);
    }
    const std::size_t d = locals.front().dim();
    std::vector<double> acc(d, 0.0);
    for (const auto& m : locals) {
        if (m.dim() != d) fail(ErrorCode::DimensionMismatch, "local distances differ in dim");
        if (m.kind() != MisalignmentKind::local_single) {
            fail(ErrorCode::InvalidInput, "average_local expects local_single distances");
        }
        for (std::size_t i = 0; i < d; ++i) acc[i] += m[i];
    }
    const double n = static_cast<double>(locals.size());
    for (double& v : acc) v /= n;
    return Misalignment(std::move(acc), MisalignmentKind::local_mean);
}

inline Misalignment combine(const Misalignment& global, const Misalignment& local,
                            const FusionConfig& cfg) {
    if (global.dim() != local.dim()) {
        fail(ErrorCode::DimensionMismatch, "global dim " + std::to_string(global.dim()) +
                                               " vs local dim " + std::to_string(local.dim()));
    }
    const double w1 = cfg.effective_w1();
    const double w2 = cfg.effective_w2();
    std::vector<double> out(global.dim());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // A zero weight drops its term outright so the other side is reproduced exactly.
        double v = 0.0;
        if (w1 != 0.0) v += w1 * global[i];
        if (w2 != 0.0) v += w2 * local[i];
        out[i] = v;
    }
    return Misalignment(std::move(out), MisalignmentKind::combined);
}

}  // namespace item
