#pragma once
// Deterministic stand-in for the captioner, encoder and detector.
//
// Synthetic images are byte blobs whose first line is
//     ITEM-SYN/1 label=<real|fake>
// followed by arbitrary content that makes each image distinct. Any other
// non-empty payload is accepted and treated as real.
//
// The image embedding direction is a hash of (seed, bytes). Captions and
// object phrases carry the image key, so embed_text can place the caption
// embedding at a controlled angle from its image: real_align_deg for real
// images, fake_align_deg for fake ones, plus uniform jitter in
// [-noise_deg, noise_deg]. Object crops get their own direction and their
// phrases follow the local angles. Like real joint encoders, text embeddings
// are offset from their images along a partly shared "modality gap"
// direction; gap_weight sets how much of the rotation follows it.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "item/classifier.hpp"
#include "item/providers.hpp"
#include "item/util.hpp"

namespace item {

inline constexpr std::string_view kSyntheticMagic = "ITEM-SYN/1";

inline std::vector<char> make_synthetic_image(Label label, std::string_view content) {
    std::string s(kSyntheticMagic);
    s += " label=";
    s += to_string(label);
    s += '\n';
    s += content;
    return std::vector<char>(s.begin(), s.end());
}

class SyntheticProvider final : public Captioner, public ImageTextEncoder, public ObjectDetector {
public:
    SyntheticProvider(std::size_t dim, SyntheticParams params) : dim_(dim), params_(params) {
        if (dim_ < 2) fail(ErrorCode::InvalidConfig, "synthetic provider needs dim >= 2");
        if (!(params_.gap_weight >= 0.0 && params_.gap_weight <= 1.0)) {
            fail(ErrorCode::InvalidConfig, "gap_weight must lie in [0, 1]");
        }
        gap_ = direction(util::mix(params_.seed, 0x6A9));
    }

    std::size_t dim() const override { return dim_; }
    const SyntheticParams& params() const noexcept { return params_; }

    std::string caption(const ImageRef& image) const override {
        const Parsed p = parse(image);
        const std::string tag = tag_of(p);
        std::string text = "synthetic scene " + tag;
        for (std::size_t i = 0; i < params_.objects_per_image; ++i) {
            text += i == 0 ? " showing " : " and ";
            text += object_phrase(tag, i);
        }
        return text;
    }

    Embedding embed_image(const ImageRef& image) const override {
        const Parsed p = parse(image);
        const std::uint64_t k = image.region ? region_key(p.key, *image.region) : p.key;
        return Embedding(scaled(direction(k), length(util::mix(k, 0x11))));
    }

    Embedding embed_text(std::string_view text) const override {
        if (text.empty()) fail(ErrorCode::InvalidInput, "empty text");
        static const std::regex global_re(R"(^synthetic scene ([rf])([0-9a-f]{16})( .*)?$)");
        static const std::regex object_re(R"(^object ([rf])([0-9a-f]{16})\.([0-9]+)$)");
        const std::string s(text);
        const std::uint64_t text_key = util::mix(params_.seed, util::fnv1a64(text));
        std::smatch m;
        if (std::regex_match(s, m, object_re)) {
            const bool fake = m[1] == "f";
            const std::uint64_t key = *util::parse_hex16(m[2].str());
            const std::size_t index = std::stoul(m[3].str());
            const std::uint64_t crop = region_key(key, object_box(key, index));
            const double angle = (fake ? params_.local_fake() : params_.local_real()) +
                                 jitter(util::mix(crop, 0x22));
            return Embedding(scaled(rotate_away(direction(crop), util::mix(crop, 0x33), angle),
                                    length(util::mix(text_key, 0x44))));
        }
        if (std::regex_match(s, m, global_re)) {
            const bool fake = m[1] == "f";
            const std::uint64_t key = *util::parse_hex16(m[2].str());
            const double angle =
                (fake ? params_.fake_align_deg : params_.real_align_deg) + jitter(util::mix(key, 0x22));
            return Embedding(scaled(rotate_away(direction(key), util::mix(key, 0x33), angle),
                                    length(util::mix(text_key, 0x44))));
        }
        return Embedding(scaled(direction(text_key), length(util::mix(text_key, 0x44))));
    }

    std::vector<ObjectDetection> detect_objects(const ImageRef& image,
                                                std::string_view caption) const override {
        if (caption.empty()) fail(ErrorCode::InvalidInput, "empty caption");
        const Parsed p = parse(image);
        const std::string tag = tag_of(p);
        std::vector<ObjectDetection> out;
        for (std::size_t i = 0; i < params_.objects_per_image; ++i) {
            ObjectDetection d;
            d.phrase = object_phrase(tag, i);
            // Only phrases the caption actually mentions can be grounded.
            if (!contains_token(caption, d.phrase)) continue;
            d.box = object_box(p.key, i);
            d.confidence = 0.5 + 0.5 * unit(util::mix(p.key, 0x5500 + i));
            out.push_back(std::move(d));
        }
        return out;
    }

    // Box of the i-th synthetic object of the image with key `key`.
    static Box object_box(std::uint64_t key, std::size_t index) {
        const std::uint64_t k = util::mix(key, 0x6600 + index);
        Box b;
        b.x0 = 0.5 * unit(util::mix(k, 1));
        b.y0 = 0.5 * unit(util::mix(k, 2));
        b.x1 = b.x0 + 0.2 + 0.3 * unit(util::mix(k, 3));
        b.y1 = b.y0 + 0.2 + 0.3 * unit(util::mix(k, 4));
        return b;
    }

    // Key of an image as the provider sees it; exposed for tests.
    std::uint64_t image_key(const ImageRef& image) const { return parse(image).key; }

private:
    struct Parsed {
        std::uint64_t key = 0;
        Label label = Label::real;
    };

    Parsed parse(const ImageRef& image) const {
        const std::vector<char> bytes = image.load_bytes();
        if (bytes.empty()) fail(ErrorCode::ImageDecodeError, "empty image " + image.describe());
        Parsed p;
        const std::string_view view(bytes.data(), bytes.size());
        if (view.starts_with(kSyntheticMagic)) {
            const auto eol = view.find('\n');
            const std::string_view header = view.substr(0, eol);
            if (header == std::string(kSyntheticMagic) + " label=fake") {
                p.label = Label::fake;
            } else if (header != std::string(kSyntheticMagic) + " label=real") {
                fail(ErrorCode::ImageDecodeError, "malformed synthetic header in " + image.describe());
            }
        }
        p.key = util::mix(params_.seed, util::fnv1a64(view));
        return p;
    }

    static std::string tag_of(const Parsed& p) {
        return (p.label == Label::fake ? "f" : "r") + util::hex16(p.key);
    }

    static std::string object_phrase(const std::string& tag, std::size_t i) {
        return "object " + tag + "." + std::to_string(i);
    }

    static bool contains_token(std::string_view text, std::string_view phrase) {
        for (std::size_t pos = text.find(phrase); pos != std::string_view::npos;
             pos = text.find(phrase, pos + 1)) {
            const std::size_t end = pos + phrase.size();
            if (end == text.size() || !std::isdigit(static_cast<unsigned char>(text[end]))) return true;
        }
        return false;
    }

    static std::uint64_t region_key(std::uint64_t key, const Box& b) {
        auto q = [](double v) { return static_cast<std::uint64_t>(std::llround(v * 1e6)); };
        std::uint64_t k = util::mix(key, 0x7700);
        for (double v : {b.x0, b.y0, b.x1, b.y1}) k = util::mix(k, q(v));
        return k;
    }

    // Uniform in [0, 1).
    static double unit(std::uint64_t h) noexcept {
        return static_cast<double>(util::splitmix64(h) >> 11) * 0x1.0p-53;
    }

    double jitter(std::uint64_t h) const noexcept {
        return params_.noise_deg * (2.0 * unit(h) - 1.0);
    }

    static double length(std::uint64_t h) noexcept { return 0.5 + 1.5 * unit(h); }

    std::vector<double> direction(std::uint64_t key) const {
        std::mt19937_64 rng(key);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> v(dim_);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : v) {
                x = n(rng);
                norm += x * x;
            }
        } while (norm < 1e-6);
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    }

    // Unit vector at `angle_deg` from the unit vector `u`. The rotation
    // heads towards gap_weight * (shared gap direction) + (1 - gap_weight) *
    // (hash-chosen direction), projected orthogonal to u.
    std::vector<double> rotate_away(const std::vector<double>& u, std::uint64_t key,
                                    double angle_deg) const {
        std::vector<double> w;
        double wn = 0.0;
        for (std::uint64_t attempt = 0; wn < 1e-6; ++attempt) {
            w = direction(util::mix(key, attempt));
            // Retries fall back to the per-key direction alone.
            const double g = attempt == 0 ? params_.gap_weight : 0.0;
            for (std::size_t i = 0; i < dim_; ++i) w[i] = g * gap_[i] + (1.0 - g) * w[i];
            double proj = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) proj += w[i] * u[i];
            wn = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) {
                w[i] -= proj * u[i];
                wn += w[i] * w[i];
            }
            wn = std::sqrt(wn);
        }
        const double a = angle_deg * std::numbers::pi / 180.0;
        const double c = std::cos(a);
        const double s = std::sin(a);
        std::vector<double> t(dim_);
        for (std::size_t i = 0; i < dim_; ++i) t[i] = c * u[i] + s * w[i] / wn;
        return t;
    }

    static std::vector<double> scaled(std::vector<double> v, double len) {
        for (double& x : v) x *= len;
        return v;
    }

    std::size_t dim_;
    SyntheticParams params_;
    std::vector<double> gap_;  // text-side offset shared by all captions
};

}  // namespace item
