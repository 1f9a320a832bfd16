#pragma once
// Trained head on disk:
//   "ITMC" | u16 version=1 | u32 input_dim | u32 hidden_dim | W1 b1 W2 b2 (f64, row-major)
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "item/binary_io.hpp"
#include "item/classifier.hpp"

namespace item {

inline constexpr std::string_view kModelMagic = "ITMC";
inline constexpr std::uint16_t kModelVersion = 1;

inline std::vector<char> serialize_head(const MlpHead& h) {
    binary::Writer w;
    w.bytes(kModelMagic);
    w.uint<std::uint16_t>(kModelVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(h.input_dim));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(h.hidden_dim));
    for (double v : h.w1) w.f64(v);
    for (double v : h.b1) w.f64(v);
    for (double v : h.w2) w.f64(v);
    for (double v : h.b2) w.f64(v);
    return w.take();
}

inline MlpHead deserialize_head(std::span<const char> data) {
    binary::Reader r(data);
    r.expect_bytes(kModelMagic, ErrorCode::FormatError, "model magic");
    const auto version = r.uint<std::uint16_t>();
    if (version != kModelVersion) {
        fail(ErrorCode::FormatError, "unsupported model version " + std::to_string(version));
    }
    const std::uint64_t in = r.uint<std::uint32_t>();
    const std::uint64_t hid = r.uint<std::uint32_t>();
    if (in == 0 || hid == 0) fail(ErrorCode::FormatError, "model dims must be >= 1");
    // Both factors are < 2^32, so 128-bit arithmetic cannot wrap.
    const unsigned __int128 params =
        static_cast<unsigned __int128>(hid) * in + hid + 2 * static_cast<unsigned __int128>(hid) + 2;
    if (params * 8 != static_cast<unsigned __int128>(r.remaining())) {
        fail(ErrorCode::FormatError, "model payload size does not match its dimensions");
    }
    MlpHead h = MlpHead::zeros(in, hid);
    for (double& v : h.w1) v = r.f64();
    for (double& v : h.b1) v = r.f64();
    for (double& v : h.w2) v = r.f64();
    for (double& v : h.b2) v = r.f64();
    if (!h.all_finite()) fail(ErrorCode::FormatError, "model contains non-finite parameters");
    return h;
}

inline void save_head(const MlpHead& h, const std::filesystem::path& path) {
    const auto bytes = serialize_head(h);
    binary::write_file(path, std::span<const char>(bytes));
}

inline MlpHead load_head(const std::filesystem::path& path) {
    const auto bytes = binary::read_file(path);
    return deserialize_head(bytes);
}

}  // namespace item
