#pragma once
// Little-endian byte packing shared by the model and embedding file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "item/error.hpp"

namespace item::binary {

class Writer {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    template <typename UInt>
    void uint(UInt v) {
        for (std::size_t i = 0; i < sizeof(UInt); ++i) {
            buf_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
        }
    }

    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& buffer() const noexcept { return buf_; }
    std::vector<char> take() noexcept { return std::move(buf_); }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const char> data) : data_(data) {}

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    void expect_bytes(std::string_view s, ErrorCode code, const char* what) {
        require(s.size(), code);
        if (std::memcmp(data_.data() + pos_, s.data(), s.size()) != 0) {
            fail(code, std::string("bad ") + what);
        }
        pos_ += s.size();
    }

    template <typename UInt>
    UInt uint(ErrorCode code = ErrorCode::FormatError) {
        require(sizeof(UInt), code);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(UInt); ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(UInt);
        return static_cast<UInt>(v);
    }

    float f32(ErrorCode code = ErrorCode::FormatError) {
        return std::bit_cast<float>(uint<std::uint32_t>(code));
    }
    double f64(ErrorCode code = ErrorCode::FormatError) {
        return std::bit_cast<double>(uint<std::uint64_t>(code));
    }

private:
    void require(std::size_t n, ErrorCode code) const {
        if (remaining() < n) fail(code, "truncated payload");
    }

    std::span<const char> data_;
    std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorCode::IoError, "read failed for " + path.string());
    return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const char> data) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace item::binary
