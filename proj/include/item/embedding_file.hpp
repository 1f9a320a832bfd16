#pragma once
// Precomputed embeddings on disk:
//   "ITEM" | u16 version=1 | u16 reserved=0 | u32 dim | u64 count | count*dim f32 (row-major)
// All fields little-endian.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "item/binary_io.hpp"
#include "item/error.hpp"
#include "item/representation.hpp"

namespace item {

inline constexpr std::string_view kEmbeddingMagic = "ITEM";
inline constexpr std::uint16_t kEmbeddingVersion = 1;

struct EmbeddingMatrix {
    std::uint32_t dim = 0;
    std::vector<float> data;

    std::uint64_t count() const noexcept { return dim == 0 ? 0 : data.size() / dim; }

    std::span<const float> row(std::uint64_t i) const {
        if (i >= count()) {
            fail(ErrorCode::MissingArtifact, "row " + std::to_string(i) + " out of range (count " +
                                                 std::to_string(count()) + ")");
        }
        return std::span<const float>(data).subspan(i * dim, dim);
    }

    void append(std::span<const float> values) {
        if (values.size() != dim) fail(ErrorCode::DimensionMismatch, "row has wrong dim");
        data.insert(data.end(), values.begin(), values.end());
    }

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

inline std::vector<char> serialize_embeddings(const EmbeddingMatrix& m) {
    if (m.dim == 0) fail(ErrorCode::FormatError, "embedding dim must be >= 1");
    if (m.data.size() % m.dim != 0) fail(ErrorCode::FormatError, "ragged embedding matrix");
    binary::Writer w;
    w.bytes(kEmbeddingMagic);
    w.uint<std::uint16_t>(kEmbeddingVersion);
    w.uint<std::uint16_t>(0);
    w.uint<std::uint32_t>(m.dim);
    w.uint<std::uint64_t>(m.count());
    for (float v : m.data) w.f32(v);
    return w.take();
}

inline EmbeddingMatrix deserialize_embeddings(std::span<const char> bytes) {
    binary::Reader r(bytes);
    r.expect_bytes(kEmbeddingMagic, ErrorCode::FormatError, "embedding file magic");
    const auto version = r.uint<std::uint16_t>();
    if (version != kEmbeddingVersion) {
        fail(ErrorCode::FormatError, "unsupported embedding file version " + std::to_string(version));
    }
    if (r.uint<std::uint16_t>() != 0) fail(ErrorCode::FormatError, "reserved field must be 0");
    EmbeddingMatrix m;
    m.dim = r.uint<std::uint32_t>();
    const std::uint64_t count = r.uint<std::uint64_t>();
    if (m.dim == 0) fail(ErrorCode::FormatError, "embedding dim must be >= 1");
    const unsigned __int128 payload = static_cast<unsigned __int128>(count) * m.dim * 4;
    if (payload > r.remaining()) fail(ErrorCode::FormatError, "truncated embedding payload");
    if (payload < r.remaining()) fail(ErrorCode::FormatError, "trailing bytes after embeddings");
    m.data.resize(static_cast<std::size_t>(count) * m.dim);
    for (float& v : m.data) v = r.f32();
    return m;
}

inline void write_embedding_file(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    const auto bytes = serialize_embeddings(m);
    binary::write_file(path, std::span<const char>(bytes));
}

inline EmbeddingMatrix read_embedding_file(const std::filesystem::path& path) {
    const auto bytes = binary::read_file(path);
    return deserialize_embeddings(bytes);
}

struct EmbeddingRef {
    std::string file;
    std::uint64_t row = 0;

    friend bool operator==(const EmbeddingRef&, const EmbeddingRef&) = default;
};

// Lazily loads embedding files under `root` and hands out rows widened to
// double. Safe for concurrent use.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::filesystem::path root) : root_(std::move(root)) {}

    Embedding get(const EmbeddingRef& ref) const {
        const auto m = matrix(ref.file);
        const auto row = m->row(ref.row);
        Embedding e;
        try {
            e = Embedding::from_floats(row);
        } catch (const Error&) {
            fail(ErrorCode::FormatError, ref.file + " row " + std::to_string(ref.row) +
                                             " has non-finite values");
        }
        return e;
    }

    std::shared_ptr<const EmbeddingMatrix> matrix(const std::string& file) const {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(file); it != cache_.end()) return it->second;
        const std::filesystem::path path = root_ / file;
        if (!std::filesystem::exists(path)) {
            fail(ErrorCode::MissingArtifact, "embedding file " + path.string() + " not found");
        }
        auto m = std::make_shared<const EmbeddingMatrix>(read_embedding_file(path));
        cache_.emplace(file, m);
        return m;
    }

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::shared_ptr<const EmbeddingMatrix>> cache_;
};

}  // namespace item
