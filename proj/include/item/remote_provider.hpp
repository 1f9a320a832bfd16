#pragma once
// HTTP client for a model sidecar speaking JSON:
//
//   POST /v1/caption      {"image_b64"}                       -> {"caption"}
//   POST /v1/embed/image  {"image_b64", "region"?}            -> {"embedding", "dim"}
//   POST /v1/embed/text   {"text"}                            -> {"embedding", "dim"}
//   POST /v1/detect       {"image_b64", "caption"}            -> {"objects": [{"phrase", "box", "confidence"}]}
//
// Images are preprocessed locally before embedding: whole images are center
// cropped to the configured size, object regions are cut out and square
// padded. The sidecar therefore always receives exactly the pixels to embed
// and no region field. Requests are bounded by a semaphore and never retried.

#include <chrono>
#include <climits>
#include <cmath>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "item/image.hpp"
#include "item/providers.hpp"
#include "item/util.hpp"

namespace item {

class RemoteProvider final : public Captioner, public ImageTextEncoder, public ObjectDetector {
public:
    explicit RemoteProvider(const ProviderConfig& cfg, int crop_size = 224)
        : endpoint_(cfg.endpoint.value_or("")),
          dim_(cfg.embedding_dim),
          timeout_(std::chrono::duration_cast<std::chrono::microseconds>(
              std::chrono::duration<double>(cfg.timeout_s))),
          crop_size_(crop_size),
          slots_(std::make_unique<std::counting_semaphore<INT_MAX>>(
              static_cast<std::ptrdiff_t>(cfg.max_inflight))) {
        if (endpoint_.empty()) fail(ErrorCode::InvalidConfig, "remote provider needs an endpoint");
        if (cfg.max_inflight < 1) fail(ErrorCode::InvalidConfig, "max_inflight must be >= 1");
    }

    std::size_t dim() const override { return dim_; }

    std::string caption(const ImageRef& image) const override {
        const auto bytes = image.load_bytes();
        const auto reply = post("/v1/caption", {{"image_b64", util::base64_encode(bytes)}});
        const auto it = reply.find("caption");
        if (it == reply.end() || !it->is_string() || it->get<std::string>().empty()) {
            fail(ErrorCode::ProtocolViolation, "caption reply lacks a nonempty 'caption'");
        }
        return it->get<std::string>();
    }

    Embedding embed_image(const ImageRef& image) const override {
        const Image decoded = decode_image(image.load_bytes());
        const Image prepared =
            image.region ? crop_object(decoded, *image.region) : center_crop(decoded, crop_size_);
        const auto png = encode_png(prepared);
        return read_embedding(post("/v1/embed/image", {{"image_b64", util::base64_encode(png)}}));
    }

    Embedding embed_text(std::string_view text) const override {
        if (text.empty()) fail(ErrorCode::InvalidInput, "empty text");
        return read_embedding(post("/v1/embed/text", {{"text", std::string(text)}}));
    }

    std::vector<ObjectDetection> detect_objects(const ImageRef& image,
                                                std::string_view caption) const override {
        if (caption.empty()) fail(ErrorCode::InvalidInput, "empty caption");
        const auto bytes = image.load_bytes();
        const auto reply = post("/v1/detect", {{"image_b64", util::base64_encode(bytes)},
                                               {"caption", std::string(caption)}});
        const auto it = reply.find("objects");
        if (it == reply.end() || !it->is_array()) {
            fail(ErrorCode::ProtocolViolation, "detect reply lacks an 'objects' array");
        }
        std::vector<ObjectDetection> out;
        for (const auto& o : *it) {
            if (!o.is_object() || !o.contains("phrase") || !o["phrase"].is_string() ||
                !o.contains("box") || !o["box"].is_array() || o["box"].size() != 4 ||
                !o.contains("confidence") || !o["confidence"].is_number()) {
                fail(ErrorCode::ProtocolViolation, "malformed detection entry");
            }
            ObjectDetection d;
            d.phrase = o["phrase"].get<std::string>();
            const auto& b = o["box"];
            for (const auto& v : b) {
                if (!v.is_number()) fail(ErrorCode::ProtocolViolation, "box entries must be numbers");
            }
            d.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
            d.confidence = o["confidence"].get<double>();
            validate_detection(d, caption);
            out.push_back(std::move(d));
        }
        return out;
    }

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        slots_->acquire();
        struct Release {
            std::counting_semaphore<INT_MAX>* s;
            ~Release() { s->release(); }
        } release{slots_.get()};

        httplib::Client client(endpoint_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = timeout_ - secs;
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
                fail(ErrorCode::Timeout, path + ": " + httplib::to_string(err));
            }
            throw RemoteError(0, path + ": " + httplib::to_string(err));
        }
        if (res->status < 200 || res->status >= 300) {
            throw RemoteError(res->status, res->body.substr(0, 256));
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            if (!j.is_object()) fail(ErrorCode::ProtocolViolation, path + ": reply is not an object");
            return j;
        } catch (const nlohmann::json::parse_error&) {
            fail(ErrorCode::ProtocolViolation, path + ": reply is not valid JSON");
        }
    }

    Embedding read_embedding(const nlohmann::json& reply) const {
        const auto it = reply.find("embedding");
        if (it == reply.end() || !it->is_array()) {
            fail(ErrorCode::ProtocolViolation, "reply lacks an 'embedding' array");
        }
        std::vector<double> values;
        values.reserve(it->size());
        for (const auto& v : *it) {
            if (!v.is_number()) fail(ErrorCode::ProtocolViolation, "embedding entries must be numbers");
            values.push_back(v.get<double>());
        }
        if (auto d = reply.find("dim"); d != reply.end()) {
            if (!d->is_number_integer() || d->get<std::int64_t>() != static_cast<std::int64_t>(values.size())) {
                fail(ErrorCode::ProtocolViolation, "'dim' disagrees with the embedding length");
            }
        }
        if (values.size() != dim_) {
            fail(ErrorCode::DimensionMismatch, "remote returned " + std::to_string(values.size()) +
                                                   " values, expected " + std::to_string(dim_));
        }
        for (double v : values) {
            if (!std::isfinite(v)) fail(ErrorCode::ProtocolViolation, "non-finite embedding value");
        }
        return Embedding(std::move(values));
    }

    std::string endpoint_;
    std::size_t dim_;
    std::chrono::microseconds timeout_;
    int crop_size_;
    std::unique_ptr<std::counting_semaphore<INT_MAX>> slots_;
};

}  // namespace item
