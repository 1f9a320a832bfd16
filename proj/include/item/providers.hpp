#pragma once
// Contracts for the three pretrained models the detector depends on: a
// captioner, a joint image/text encoder and a grounded object detector.
// Implementations must tolerate concurrent calls.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "item/binary_io.hpp"
#include "item/error.hpp"
#include "item/image.hpp"
#include "item/representation.hpp"

namespace item {

struct ImageRef {
    enum class Source { file_path, inline_bytes };

    Source source = Source::file_path;
    std::filesystem::path path;
    std::vector<char> bytes;
    std::optional<Box> region;  // crop designation for object embeddings

    static ImageRef file(std::filesystem::path p) {
        ImageRef r;
        r.source = Source::file_path;
        r.path = std::move(p);
        return r;
    }

    static ImageRef inline_data(std::vector<char> b) {
        ImageRef r;
        r.source = Source::inline_bytes;
        r.bytes = std::move(b);
        return r;
    }

    ImageRef with_region(const Box& box) const {
        if (!box.valid()) fail(ErrorCode::InvalidInput, "invalid region box");
        ImageRef r = *this;
        r.region = box;
        return r;
    }

    // Encoded image bytes; unreadable files surface as ImageDecodeError.
    std::vector<char> load_bytes() const {
        if (source == Source::inline_bytes) return bytes;
        try {
            return binary::read_file(path);
        } catch (const Error& e) {
            fail(ErrorCode::ImageDecodeError, e.message());
        }
    }

    std::string describe() const {
        return source == Source::file_path ? path.string()
                                           : "<" + std::to_string(bytes.size()) + " inline bytes>";
    }
};

struct ObjectDetection {
    std::string phrase;
    Box box;
    double confidence = 1.0;

    friend bool operator==(const ObjectDetection&, const ObjectDetection&) = default;
};

inline void validate_detection(const ObjectDetection& d, std::string_view caption,
                               ErrorCode code = ErrorCode::ProtocolViolation) {
    if (d.phrase.empty()) fail(code, "detection with empty phrase");
    if (!d.box.valid()) fail(code, "detection box violates 0 <= x0 < x1 <= 1, 0 <= y0 < y1 <= 1");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) fail(code, "confidence outside [0, 1]");
    if (!caption.empty() && caption.find(d.phrase) == std::string_view::npos) {
        fail(code, "phrase '" + d.phrase + "' is not part of the caption");
    }
}

class Captioner {
public:
    virtual ~Captioner() = default;
    virtual std::string caption(const ImageRef& image) const = 0;
};

class ImageTextEncoder {
public:
    virtual ~ImageTextEncoder() = default;
    virtual std::size_t dim() const = 0;
    virtual Embedding embed_image(const ImageRef& image) const = 0;
    virtual Embedding embed_text(std::string_view text) const = 0;
};

class ObjectDetector {
public:
    virtual ~ObjectDetector() = default;
    virtual std::vector<ObjectDetection> detect_objects(const ImageRef& image,
                                                        std::string_view caption) const = 0;
};

// The three roles may come from different backends, e.g. to swap only the
// captioner.
struct Providers {
    std::shared_ptr<const Captioner> captioner;
    std::shared_ptr<const ImageTextEncoder> encoder;
    std::shared_ptr<const ObjectDetector> detector;

    template <typename P>
    static Providers from(std::shared_ptr<P> p) {
        return Providers{p, p, p};
    }
};

enum class ProviderKind { synthetic, file, remote };

struct SyntheticParams {
    std::uint64_t seed = 0;
    double real_align_deg = 20.0;
    double fake_align_deg = 60.0;
    double noise_deg = 5.0;
    std::size_t objects_per_image = 2;
    double gap_weight = 0.5;
    // Object-level angles; unset means "same as the global ones".
    std::optional<double> local_real_align_deg;
    std::optional<double> local_fake_align_deg;

    double local_real() const noexcept { return local_real_align_deg.value_or(real_align_deg); }
    double local_fake() const noexcept { return local_fake_align_deg.value_or(fake_align_deg); }
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::synthetic;
    std::size_t embedding_dim = 768;
    std::optional<std::string> endpoint;
    std::optional<std::filesystem::path> artifact_root;
    SyntheticParams synthetic;
    double timeout_s = 30.0;
    std::size_t max_inflight = 8;

    void validate() const {
        if (embedding_dim < 1) fail(ErrorCode::InvalidConfig, "embedding_dim must be >= 1");
        if (kind == ProviderKind::remote && !endpoint) {
            fail(ErrorCode::InvalidConfig, "remote provider needs an endpoint");
        }
        if (!(timeout_s > 0.0)) fail(ErrorCode::InvalidConfig, "timeout must be > 0");
        if (max_inflight < 1) fail(ErrorCode::InvalidConfig, "max_inflight must be >= 1");
        if (!(synthetic.noise_deg >= 0.0)) fail(ErrorCode::InvalidConfig, "noise_deg must be >= 0");
        if (!(synthetic.gap_weight >= 0.0 && synthetic.gap_weight <= 1.0)) {
            fail(ErrorCode::InvalidConfig, "gap_weight must lie in [0, 1]");
        }
    }
};

inline void check_embedding_dim(const Embedding& e, std::size_t expected, std::string_view what) {
    if (e.dim() != expected) {
        fail(ErrorCode::DimensionMismatch, std::string(what) + " has dim " +
                                               std::to_string(e.dim()) + ", expected " +
                                               std::to_string(expected));
    }
}

}  // namespace item
