#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "item/binary_io.hpp"
#include "item/image.hpp"
#include "item/perturb.hpp"
#include "support.hpp"

namespace item {
namespace {

using testing::code_of;

Image gradient_image(int w, int h) {
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = static_cast<float>(x) / (w - 1);
            img.at(x, y, 1) = static_cast<float>(y) / (h - 1);
            img.at(x, y, 2) = static_cast<float>(x + y) / (w + h - 2);
        }
    return img;
}

Image fixture_photo() { return read_image(std::filesystem::path(ITEM_FIXTURE_DIR) / "photo.png"); }

double sample_std(const Image& a, const Image& b) {
    double sum = 0.0, sq = 0.0;
    const double n = static_cast<double>(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        sum += d;
        sq += d * d;
    }
    const double mean = sum / n;
    return std::sqrt(sq / n - mean * mean);
}

int max_level_diff(const Image& a, const Image& b) {
    int m = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(to_u8(a.data[i]) - to_u8(b.data[i])));
    return m;
}

TEST(Codec, Png8RoundTrip) {
    const auto img = quantize_8bit(gradient_image(37, 21));
    const auto back = decode_image(encode_png(img));
    EXPECT_EQ(back.width, 37);
    EXPECT_EQ(back.height, 21);
    EXPECT_EQ(max_level_diff(back, img), 0);
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_EQ(back.data[i], img.data[i]);
}

TEST(Codec, Png16KeepsFinePrecision) {
    auto img = Image(8, 8, 0.5f);
    img.at(3, 3, 1) = 0.5f + 0.001f;
    const auto back = decode_image(encode_png(img, 16));
    EXPECT_NEAR(back.at(3, 3, 1) - back.at(0, 0, 1), 0.001, 2.0 / 65535);
}

TEST(Codec, ChannelOrderIsRgb) {
    Image img(2, 1);
    img.at(0, 0, 0) = 1.0f;  // red
    img.at(1, 0, 2) = 1.0f;  // blue
    const auto back = decode_image(encode_png(img));
    EXPECT_EQ(back.at(0, 0, 0), 1.0f);
    EXPECT_EQ(back.at(0, 0, 2), 0.0f);
    EXPECT_EQ(back.at(1, 0, 2), 1.0f);
}

TEST(Codec, DecodeErrors) {
    EXPECT_EQ(code_of([] { decode_image({}); }), ErrorCode::ImageDecodeError);
    const std::string junk = "not an image at all";
    EXPECT_EQ(code_of([&] { decode_image(std::span<const char>(junk.data(), junk.size())); }),
              ErrorCode::ImageDecodeError);
    EXPECT_EQ(code_of([] { read_image("/nonexistent/file.png"); }), ErrorCode::ImageDecodeError);
}

TEST(Codec, FixturePhotoLoads) {
    const auto img = fixture_photo();
    EXPECT_EQ(img.width, 256);
    EXPECT_EQ(img.height, 256);
}

TEST(CenterCrop, LargeInputTakesCentralWindow) {
    const auto img = gradient_image(448, 448);
    const auto c = center_crop(img, 224);
    ASSERT_EQ(c.width, 224);
    ASSERT_EQ(c.height, 224);
    for (int y : {0, 100, 223})
        for (int x : {0, 50, 223})
            for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(c.at(x, y, ch), img.at(x + 112, y + 112, ch));
}

TEST(CenterCrop, ExactSizeIsIdentity) {
    const auto img = gradient_image(224, 224);
    EXPECT_EQ(center_crop(img, 224), img);
}

TEST(Resize, HalfPixelCentersMatchHandValues) {
    Image img(2, 1);
    for (int c = 0; c < 3; ++c) img.at(1, 0, c) = 1.0f;
    const auto out = resize_bilinear(img, 4, 2);
    const float expect[] = {0.0f, 0.25f, 0.75f, 1.0f};
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_NEAR(out.at(x, y, 2), expect[x], 1e-6) << x;
}

TEST(CenterCrop, SmallInputScalesShorterSide) {
    const auto img = gradient_image(300, 200);
    const auto c = center_crop(img, 224);
    EXPECT_EQ(c.width, 224);
    EXPECT_EQ(c.height, 224);
    // Scaled to 336x224, so the crop spans source columns 50..250 and all rows.
    const auto scaled = resize_bilinear(img, 336, 224);
    EXPECT_EQ(c, crop(scaled, 56, 0, 224, 224));
    EXPECT_NEAR(c.at(0, 0, 1), 0.0, 0.01);
    EXPECT_NEAR(c.at(0, 223, 1), 1.0, 0.01);
    EXPECT_NEAR(c.at(112, 0, 0), 150.0 / 299.0, 0.01);
}

TEST(CropObject, SquarePadsRegion) {
    const auto img = gradient_image(100, 50);
    const auto c = crop_object(img, Box{0.1, 0.2, 0.5, 0.4});  // 40 x 10 pixels
    ASSERT_EQ(c.width, 40);
    ASSERT_EQ(c.height, 40);
    EXPECT_EQ(c.at(0, 0, 0), 0.0f);                 // padding
    EXPECT_EQ(c.at(0, 15, 0), img.at(10, 10, 0));    // first region row
    EXPECT_EQ(c.at(39, 24, 1), img.at(49, 19, 1));   // last region row
    EXPECT_EQ(c.at(5, 39, 2), 0.0f);
}

TEST(CropObject, InvalidBox) {
    EXPECT_EQ(code_of([] { crop_object(gradient_image(10, 10), Box{0.5, 0.1, 0.5, 0.9}); }), ErrorCode::InvalidInput);
}

TEST(Noise, SampleStdMatchesSigma) {
    const Image gray(320, 320, 0.5f);
    for (double sigma : {0.001, 0.005, 0.01}) {
        const auto out = perturb_gaussian_noise(gray, sigma, 7);
        EXPECT_NEAR(sample_std(out, gray), sigma, 0.1 * sigma) << sigma;
    }
}

TEST(Noise, DeterministicPerSeed) {
    const auto img = gradient_image(64, 64);
    EXPECT_EQ(encode_png(perturb_gaussian_noise(img, 0.01, 3), 16), encode_png(perturb_gaussian_noise(img, 0.01, 3), 16));
    EXPECT_NE(perturb_gaussian_noise(img, 0.01, 3), perturb_gaussian_noise(img, 0.01, 4));
}

TEST(Noise, ClampsAndKeepsShape) {
    const auto out = perturb_gaussian_noise(Image(30, 20, 1.0f), 0.5, 1);
    EXPECT_EQ(out.width, 30);
    EXPECT_EQ(out.height, 20);
    for (float v : out.data) {
        EXPECT_LE(v, 1.0f);
        EXPECT_GE(v, 0.0f);
    }
}

TEST(Noise, InvalidSigma) {
    EXPECT_EQ(code_of([] { perturb_gaussian_noise(Image(4, 4), 0.0, 1); }), ErrorCode::InvalidSigma);
    EXPECT_EQ(code_of([] { perturb_gaussian_noise(Image(4, 4), -1.0, 1); }), ErrorCode::InvalidSigma);
}

TEST(Blur, ConstantImageUnchanged) {
    for (double sigma : {1.0, 2.0, 3.0}) {
        const Image flat(40, 30, 137.0f / 255.0f);
        EXPECT_LE(max_level_diff(perturb_gaussian_blur(flat, sigma), flat), 1);
    }
}

TEST(Blur, KernelMatchesClosedForm) {
    const auto k = gaussian_kernel(1.5);
    ASSERT_EQ(k.size(), 11u);
    double z = 0.0;
    for (int i = -5; i <= 5; ++i) z += std::exp(-i * i / (2 * 1.5 * 1.5));
    for (int i = -5; i <= 5; ++i) EXPECT_NEAR(k[i + 5], std::exp(-i * i / (2 * 1.5 * 1.5)) / z, 1e-15);
}

TEST(Blur, SinglePixelResponse) {
    Image img(21, 21, 0.0f);
    for (int c = 0; c < 3; ++c) img.at(10, 10, c) = 1.0f;
    const auto out = perturb_gaussian_blur(img, 1.0);
    double z = 0.0;
    for (int i = -3; i <= 3; ++i) z += std::exp(-i * i / 2.0);
    const double center = 1.0 / z;  // 1-D centre tap
    EXPECT_LE(std::abs(to_u8(out.at(10, 10, 0)) - std::lround(255 * center * center)), 1);
    EXPECT_NEAR(out.at(10, 10, 0), center * center, 1e-6);
}

TEST(Blur, BrightnessPreservedOnInteriorContent) {
    Image img(64, 64, 0.0f);
    for (int y = 26; y < 38; ++y)
        for (int x = 24; x < 40; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.8f;
    const auto out = perturb_gaussian_blur(img, 3.0);
    const double before = std::accumulate(img.data.begin(), img.data.end(), 0.0);
    const double after = std::accumulate(out.data.begin(), out.data.end(), 0.0);
    EXPECT_NEAR(after, before, 0.005 * before);
}

TEST(Blur, InvalidSigmaAndShape) {
    EXPECT_EQ(code_of([] { perturb_gaussian_blur(Image(4, 4), 0.0); }), ErrorCode::InvalidSigma);
    const auto out = perturb_gaussian_blur(gradient_image(17, 9), 2.0);
    EXPECT_EQ(out.width, 17);
    EXPECT_EQ(out.height, 9);
}

TEST(Jpeg, SizeDecreasesWithQuality) {
    const auto photo = fixture_photo();
    EXPECT_LT(encode_jpeg(photo, 25).size(), encode_jpeg(photo, 50).size());
    EXPECT_LT(encode_jpeg(photo, 50).size(), encode_jpeg(photo, 75).size());
}

TEST(Jpeg, Quality100NearLossless) {
    // Grey ramp: colour ramps also pick up chroma subsampling error.
    Image img(128, 96);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 128; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(x + y) / (127 + 95);
    img = quantize_8bit(img);
    const auto out = perturb_jpeg(img, 100);
    EXPECT_EQ(out.width, 128);
    EXPECT_EQ(out.height, 96);
    EXPECT_LE(max_level_diff(out, img), 2);
}

TEST(Jpeg, IsBaselineEncoding) {
    const auto bytes = encode_jpeg(gradient_image(32, 32), 75);
    // SOF0 marker (baseline DCT) present, SOF2 (progressive) absent.
    const std::string s(bytes.begin(), bytes.end());
    EXPECT_NE(s.find("\xFF\xC0"), std::string::npos);
    EXPECT_EQ(s.find("\xFF\xC2"), std::string::npos);
}

TEST(Jpeg, QualityOutOfRange) {
    EXPECT_TRUE(code_of([] { perturb_jpeg(Image(8, 8), 0); }).has_value());
    EXPECT_TRUE(code_of([] { perturb_jpeg(Image(8, 8), 101); }).has_value());
}

TEST(Perturbation, SpecValidationAndDispatch) {
    const auto img = gradient_image(16, 16);
    EXPECT_EQ(apply_perturbation(img, {PerturbationKind::gaussian_noise, 0.01, 5}), perturb_gaussian_noise(img, 0.01, 5));
    EXPECT_EQ(apply_perturbation(img, {PerturbationKind::gaussian_blur, 2.0, 0}), perturb_gaussian_blur(img, 2.0));
    EXPECT_EQ(apply_perturbation(img, {PerturbationKind::jpeg, 50, 0}), perturb_jpeg(img, 50));
    EXPECT_EQ(code_of([&] { apply_perturbation(img, {PerturbationKind::jpeg, 50.5, 0}); }), ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([&] { apply_perturbation(img, {PerturbationKind::gaussian_blur, -2, 0}); }), ErrorCode::InvalidSigma);
}

}  // namespace
}  // namespace item
