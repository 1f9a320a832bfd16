#pragma once
// Robustness perturbations applied to images before featurization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "item/error.hpp"
#include "item/image.hpp"

namespace item {

enum class PerturbationKind { gaussian_noise, gaussian_blur, jpeg };

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::gaussian_noise;
    double param = 0.0;  // noise sigma in [0,1] units, blur sigma in pixels, or JPEG quality
    std::uint64_t seed = 0;

    void validate() const {
        switch (kind) {
            case PerturbationKind::gaussian_noise:
            case PerturbationKind::gaussian_blur:
                if (!(param > 0.0) || !std::isfinite(param)) {
                    fail(ErrorCode::InvalidSigma, "sigma must be > 0");
                }
                break;
            case PerturbationKind::jpeg:
                if (!(param >= 1.0 && param <= 100.0) || param != std::floor(param)) {
                    fail(ErrorCode::InvalidInput, "JPEG quality must be an integer in [1, 100]");
                }
                break;
        }
    }
};

inline Image perturb_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::InvalidSigma, "sigma must be > 0");
    if (img.empty()) fail(ErrorCode::InvalidInput, "empty image");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Image out = img;
    for (float& v : out.data) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
    return out;
}

// Normalized 1-D Gaussian taps for offsets -r..r, r = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::InvalidSigma, "sigma must be > 0");
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += k[i + r];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable convolution with clamp-to-edge borders.
inline Image perturb_gaussian_blur(const Image& img, double sigma) {
    const auto k = gaussian_kernel(sigma);
    if (img.empty()) fail(ErrorCode::InvalidInput, "empty image");
    const int r = static_cast<int>(k.size() / 2);
    Image tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    acc += k[i + r] * img.at(std::clamp(x + i, 0, img.width - 1), y, c);
                }
                tmp.at(x, y, c) = static_cast<float>(acc);
            }
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, img.height - 1), c);
                }
                out.at(x, y, c) = static_cast<float>(acc);
            }
    return out;
}

// Encode to baseline JPEG at `quality`, then decode back.
inline Image perturb_jpeg(const Image& img, int quality) {
    if (quality < 1 || quality > 100) fail(ErrorCode::InvalidInput, "JPEG quality must be in [1, 100]");
    const auto bytes = encode_jpeg(img, quality);
    return decode_image(bytes);
}

inline Image apply_perturbation(const Image& img, const PerturbationSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case PerturbationKind::gaussian_noise: return perturb_gaussian_noise(img, spec.param, spec.seed);
        case PerturbationKind::gaussian_blur: return perturb_gaussian_blur(img, spec.param);
        case PerturbationKind::jpeg: return perturb_jpeg(img, static_cast<int>(spec.param));
    }
    return img;
}

}  // namespace item
