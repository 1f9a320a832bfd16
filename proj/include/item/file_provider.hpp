#pragma once
// Serves captions, detections and embeddings that were exported ahead of
// time into a manifest and embedding files. Nothing is ever computed: any
// missing piece is a MissingArtifact error.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>

#include "item/embedding_file.hpp"
#include "item/manifest.hpp"
#include "item/providers.hpp"

namespace item {

class FileProvider final : public Captioner, public ImageTextEncoder, public ObjectDetector {
public:
    FileProvider(const Manifest& manifest, std::size_t dim,
                 std::shared_ptr<const EmbeddingStore> store)
        : dim_(dim), base_dir_(manifest.base_dir), store_(std::move(store)) {
        for (const auto& s : manifest.samples) {
            by_image_.emplace(key_of(base_dir_ / s.image), s);
            if (!s.embedding_refs) continue;
            const auto& refs = *s.embedding_refs;
            if (s.caption && refs.caption_text) texts_.emplace(*s.caption, *refs.caption_text);
            if (s.objects && refs.object_phrases) {
                for (std::size_t i = 0; i < s.objects->size(); ++i) {
                    texts_.emplace((*s.objects)[i].phrase, (*refs.object_phrases)[i]);
                }
            }
        }
    }

    std::size_t dim() const override { return dim_; }

    std::string caption(const ImageRef& image) const override {
        const SampleRecord& s = lookup(image);
        if (!s.caption) fail(ErrorCode::MissingArtifact, "no caption stored for sample " + s.id);
        return *s.caption;
    }

    Embedding embed_image(const ImageRef& image) const override {
        const SampleRecord& s = lookup(image);
        if (!s.embedding_refs) fail(ErrorCode::MissingArtifact, "no embedding refs for sample " + s.id);
        const auto& refs = *s.embedding_refs;
        if (!image.region) {
            if (!refs.global_image) fail(ErrorCode::MissingArtifact, "no global image embedding for " + s.id);
            return checked(store_->get(*refs.global_image));
        }
        if (s.objects && refs.object_images) {
            for (std::size_t i = 0; i < s.objects->size(); ++i) {
                if ((*s.objects)[i].box == *image.region) return checked(store_->get((*refs.object_images)[i]));
            }
        }
        fail(ErrorCode::MissingArtifact, "no stored embedding for that region of " + s.id);
    }

    Embedding embed_text(std::string_view text) const override {
        if (text.empty()) fail(ErrorCode::InvalidInput, "empty text");
        auto it = texts_.find(std::string(text));
        if (it == texts_.end()) {
            fail(ErrorCode::MissingArtifact, "no stored embedding for text '" + std::string(text) + "'");
        }
        return checked(store_->get(it->second));
    }

    std::vector<ObjectDetection> detect_objects(const ImageRef& image,
                                                std::string_view caption) const override {
        if (caption.empty()) fail(ErrorCode::InvalidInput, "empty caption");
        const SampleRecord& s = lookup(image);
        if (!s.objects) fail(ErrorCode::MissingArtifact, "no objects stored for sample " + s.id);
        return *s.objects;
    }

private:
    static std::string key_of(const std::filesystem::path& p) {
        return p.lexically_normal().generic_string();
    }

    const SampleRecord& lookup(const ImageRef& image) const {
        if (image.source != ImageRef::Source::file_path) {
            fail(ErrorCode::MissingArtifact, "file provider only serves manifest images");
        }
        auto it = by_image_.find(key_of(image.path));
        if (it == by_image_.end()) {
            fail(ErrorCode::MissingArtifact, "image " + image.path.string() + " is not in the manifest");
        }
        return it->second;
    }

    Embedding checked(Embedding e) const {
        check_embedding_dim(e, dim_, "stored embedding");
        return e;
    }

    std::size_t dim_;
    std::filesystem::path base_dir_;
    std::shared_ptr<const EmbeddingStore> store_;
    std::unordered_map<std::string, SampleRecord> by_image_;
    std::map<std::string, EmbeddingRef> texts_;
};

}  // namespace item
