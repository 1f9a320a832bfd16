#pragma once
// RGB pixel buffer in normalized [0,1] units plus the geometric preprocessing
// applied before images reach an encoder. Codecs are delegated to OpenCV.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "item/binary_io.hpp"
#include "item/error.hpp"

namespace item {

// Normalized box (x0, y0, x1, y1), each coordinate in [0,1].
struct Box {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    bool valid() const noexcept {
        auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
        return in01(x0) && in01(y0) && in01(x1) && in01(y1) && x0 < x1 && y0 < y1;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

struct Image {
    int width = 0;
    int height = 0;
    static constexpr int channels = 3;
    std::vector<float> data;  // row-major, interleaved RGB

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * channels, fill) {}

    bool empty() const noexcept { return width <= 0 || height <= 0; }
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float& at(int x, int y, int c) noexcept { return data[index(x, y, c)]; }
    float at(int x, int y, int c) const noexcept { return data[index(x, y, c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

inline std::uint8_t to_u8(float v) noexcept {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::uint16_t to_u16(float v) noexcept {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
}

// Round every pixel to the nearest 8-bit level.
inline Image quantize_8bit(const Image& img) {
    Image out = img;
    for (float& v : out.data) v = static_cast<float>(to_u8(v)) / 255.0f;
    return out;
}

namespace detail {

inline Image from_mat(const cv::Mat& m) {
    cv::Mat bgr;
    if (m.channels() == 1) {
        cv::Mat in[] = {m, m, m};
        cv::merge(in, 3, bgr);
    } else if (m.channels() == 4) {
        cv::Mat ch[4];
        cv::split(m, ch);
        cv::Mat in[] = {ch[0], ch[1], ch[2]};
        cv::merge(in, 3, bgr);
    } else {
        bgr = m;
    }
    Image img(bgr.cols, bgr.rows);
    const double scale = bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (int y = 0; y < bgr.rows; ++y) {
        for (int x = 0; x < bgr.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = 0.0;
                if (bgr.depth() == CV_16U) {
                    v = bgr.at<cv::Vec<std::uint16_t, 3>>(y, x)[2 - c];
                } else {
                    v = bgr.at<cv::Vec3b>(y, x)[2 - c];
                }
                img.at(x, y, c) = static_cast<float>(v * scale);
            }
        }
    }
    return img;
}

inline cv::Mat to_mat(const Image& img, int bit_depth) {
    if (bit_depth == 16) {
        cv::Mat m(img.height, img.width, CV_16UC3);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c)
                    m.at<cv::Vec<std::uint16_t, 3>>(y, x)[2 - c] = to_u16(img.at(x, y, c));
        return m;
    }
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) m.at<cv::Vec3b>(y, x)[2 - c] = to_u8(img.at(x, y, c));
    return m;
}

inline std::vector<char> encode(const Image& img, const std::string& ext,
                                const std::vector<int>& params, int bit_depth) {
    if (img.empty()) fail(ErrorCode::EncodeError, "cannot encode an empty image");
    std::vector<uchar> buf;
    bool ok = false;
    try {
        ok = cv::imencode(ext, to_mat(img, bit_depth), buf, params);
    } catch (const cv::Exception& e) {
        fail(ErrorCode::EncodeError, e.what());
    }
    if (!ok) fail(ErrorCode::EncodeError, "encoder rejected image as " + ext);
    return std::vector<char>(buf.begin(), buf.end());
}

}  // namespace detail

inline Image decode_image(std::span<const char> bytes) {
    if (bytes.empty()) fail(ErrorCode::ImageDecodeError, "empty image payload");
    cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1,
                const_cast<char*>(bytes.data()));
    cv::Mat m;
    try {
        m = cv::imdecode(raw, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    } catch (const cv::Exception& e) {
        fail(ErrorCode::ImageDecodeError, e.what());
    }
    if (m.empty()) fail(ErrorCode::ImageDecodeError, "unrecognized or corrupt image data");
    if (m.depth() != CV_8U && m.depth() != CV_16U) {
        fail(ErrorCode::ImageDecodeError, "unsupported sample depth");
    }
    return detail::from_mat(m);
}

inline Image read_image(const std::filesystem::path& path) {
    std::vector<char> bytes;
    try {
        bytes = binary::read_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::ImageDecodeError, e.what());
    }
    return decode_image(bytes);
}

// Lossless; 16-bit keeps sub-level perturbations such as sigma=0.001 noise.
inline std::vector<char> encode_png(const Image& img, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16) fail(ErrorCode::EncodeError, "PNG depth must be 8 or 16");
    return detail::encode(img, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6}, bit_depth);
}

// Baseline (non-progressive, non-optimized) JPEG.
inline std::vector<char> encode_jpeg(const Image& img, int quality) {
    if (quality < 1 || quality > 100) {
        fail(ErrorCode::EncodeError, "JPEG quality must be in [1, 100]");
    }
    return detail::encode(img, ".jpg",
                          {cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_PROGRESSIVE, 0,
                           cv::IMWRITE_JPEG_OPTIMIZE, 0},
                          8);
}

// Bilinear resampling with half-pixel centers.
inline Image resize_bilinear(const Image& src, int width, int height) {
    if (src.empty() || width <= 0 || height <= 0) fail(ErrorCode::InvalidInput, "bad resize");
    const cv::Mat in(src.height, src.width, CV_32FC3, const_cast<float*>(src.data.data()));
    Image out(width, height);
    cv::Mat dst(height, width, CV_32FC3, out.data.data());
    cv::resize(in, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
    return out;
}

inline Image crop(const Image& src, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > src.width || y + h > src.height) {
        fail(ErrorCode::InvalidInput, "crop window outside image");
    }
    Image out(w, h);
    for (int yy = 0; yy < h; ++yy) {
        const float* row = &src.data[src.index(x, y + yy, 0)];
        std::copy(row, row + static_cast<std::size_t>(w) * 3, &out.data[out.index(0, yy, 0)]);
    }
    return out;
}

// Shorter side is upscaled to `size` only when it is below it; the central
// size x size window is then taken.
inline Image center_crop(const Image& src, int size = 224) {
    if (src.empty()) fail(ErrorCode::InvalidInput, "center_crop of empty image");
    if (size <= 0) fail(ErrorCode::InvalidInput, "crop size must be positive");
    Image img = src;
    const int shorter = std::min(img.width, img.height);
    if (shorter < size) {
        const double scale = static_cast<double>(size) / shorter;
        const int w = img.width == shorter ? size : static_cast<int>(std::lround(img.width * scale));
        const int h = img.height == shorter ? size : static_cast<int>(std::lround(img.height * scale));
        img = resize_bilinear(img, std::max(w, size), std::max(h, size));
    }
    return crop(img, (img.width - size) / 2, (img.height - size) / 2, size, size);
}

// Object crop: the normalized box is cut from the original image, then the
// shorter side is zero-padded symmetrically to a square.
inline Image crop_object(const Image& src, const Box& box) {
    if (!box.valid()) fail(ErrorCode::InvalidInput, "invalid object box");
    const int x0 = std::clamp(static_cast<int>(std::floor(box.x0 * src.width)), 0, src.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(box.y0 * src.height)), 0, src.height - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(box.x1 * src.width)), x0 + 1, src.width);
    const int y1 = std::clamp(static_cast<int>(std::ceil(box.y1 * src.height)), y0 + 1, src.height);
    const Image region = crop(src, x0, y0, x1 - x0, y1 - y0);
    const int side = std::max(region.width, region.height);
    Image out(side, side, 0.0f);
    const int ox = (side - region.width) / 2;
    const int oy = (side - region.height) / 2;
    for (int y = 0; y < region.height; ++y)
        for (int x = 0; x < region.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(ox + x, oy + y, c) = region.at(x, y, c);
    return out;
}

}  // namespace item
