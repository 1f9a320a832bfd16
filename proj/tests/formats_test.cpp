#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <random>
#include <sstream>

#include "item/config.hpp"
#include "item/embedding_file.hpp"
#include "item/manifest.hpp"
#include "item/model_io.hpp"
#include "item/util.hpp"
#include "support.hpp"

namespace item {
namespace {

using testing::code_of;

std::vector<char> bytes_of(std::initializer_list<int> v) {
    std::vector<char> out;
    for (int b : v) out.push_back(static_cast<char>(b));
    return out;
}

// Model file

TEST(ModelFile, HeaderLayoutIsLittleEndian) {
    auto h = MlpHead::zeros(3, 2);
    h.b2 = {1.0, -2.0};
    const auto b = serialize_head(h);
    ASSERT_EQ(b.size(), 4u + 2 + 4 + 4 + 8 * (6 + 2 + 4 + 2));
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "ITMC");
    EXPECT_EQ(std::vector<char>(b.begin() + 4, b.begin() + 14), bytes_of({1, 0, 3, 0, 0, 0, 2, 0, 0, 0}));
    double last;
    std::memcpy(&last, b.data() + b.size() - 8, 8);
    EXPECT_EQ(last, -2.0);
}

TEST(ModelFile, RoundTripPreservesPredictions) {
    std::mt19937_64 rng(1);
    auto h = init_head(12, 7, 3);
    for (auto& v : h.b1) v = std::normal_distribution<double>(0, 1)(rng);
    testing::TempDir dir;
    save_head(h, dir / "m.itmc");
    const auto back = load_head(dir / "m.itmc");
    EXPECT_EQ(back, h);
    for (int t = 0; t < 50; ++t) {
        const auto d = testing::random_misalignment(12, rng);
        EXPECT_EQ(predict(back, d).prob_fake, predict(h, d).prob_fake);
    }
}

TEST(ModelFile, RejectsCorruption) {
    const auto good = serialize_head(init_head(4, 3, 1));
    auto bad = good;
    bad[0] = 'X';
    EXPECT_EQ(code_of([&] { deserialize_head(bad); }), ErrorCode::FormatError);
    bad = good;
    bad[4] = 2;
    EXPECT_EQ(code_of([&] { deserialize_head(bad); }), ErrorCode::FormatError);
    bad = good;
    bad.pop_back();
    EXPECT_EQ(code_of([&] { deserialize_head(bad); }), ErrorCode::FormatError);
    bad = good;
    bad.push_back(0);
    EXPECT_EQ(code_of([&] { deserialize_head(bad); }), ErrorCode::FormatError);
    bad = std::vector<char>(good.begin(), good.begin() + 7);
    EXPECT_EQ(code_of([&] { deserialize_head(bad); }), ErrorCode::FormatError);
}

TEST(ModelFile, RejectsDimensionOverflow) {
    binary::Writer w;
    w.bytes("ITMC");
    w.uint<std::uint16_t>(1);
    w.uint<std::uint32_t>(0xFFFFFFFFu);
    w.uint<std::uint32_t>(0xFFFFFFFFu);
    for (int i = 0; i < 16; ++i) w.f64(0.0);
    EXPECT_EQ(code_of([&] { deserialize_head(w.take()); }), ErrorCode::FormatError);
}

TEST(ModelFile, RejectsNonFiniteParameters) {
    auto h = MlpHead::zeros(2, 2);
    h.b2[0] = NAN;
    EXPECT_EQ(code_of([&] { deserialize_head(serialize_head(h)); }), ErrorCode::FormatError);
}

TEST(ModelFile, MissingFile) {
    EXPECT_EQ(code_of([] { load_head("/nonexistent/model.itmc"); }), ErrorCode::IoError);
}

// Embedding file

EmbeddingMatrix random_matrix(std::uint32_t dim, std::size_t count, std::mt19937_64& rng) {
    EmbeddingMatrix m;
    m.dim = dim;
    for (std::size_t i = 0; i < dim * count; ++i) {
        // Arbitrary finite bit patterns, including subnormals and negative zero.
        float f;
        do {
            const auto bits = static_cast<std::uint32_t>(rng());
            std::memcpy(&f, &bits, 4);
        } while (!std::isfinite(f));
        m.data.push_back(f);
    }
    return m;
}

TEST(EmbeddingFile, HeaderLayout) {
    EmbeddingMatrix m;
    m.dim = 2;
    m.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
    const auto b = serialize_embeddings(m);
    ASSERT_EQ(b.size(), 20u + 24u);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "ITEM");
    EXPECT_EQ(std::vector<char>(b.begin() + 4, b.begin() + 20),
              bytes_of({1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0}));
    float first;
    std::memcpy(&first, b.data() + 20, 4);
    EXPECT_EQ(first, 1.0f);
}

TEST(EmbeddingFile, RoundTripIsBitExact) {
    std::mt19937_64 rng(2);
    testing::TempDir dir;
    for (int t = 0; t < 20; ++t) {
        const auto m = random_matrix(1 + rng() % 40, rng() % 30, rng);
        write_embedding_file(dir / "e.emb", m);
        const auto back = read_embedding_file(dir / "e.emb");
        ASSERT_EQ(back.dim, m.dim);
        ASSERT_EQ(back.data.size(), m.data.size());
        EXPECT_EQ(std::memcmp(back.data.data(), m.data.data(), 4 * m.data.size()), 0);
    }
}

TEST(EmbeddingFile, RejectsCorruption) {
    std::mt19937_64 rng(3);
    const auto good = serialize_embeddings(random_matrix(4, 3, rng));
    auto bad = good;
    bad[1] = 'X';
    EXPECT_EQ(code_of([&] { deserialize_embeddings(bad); }), ErrorCode::FormatError);
    bad = good;
    bad[4] = 9;
    EXPECT_EQ(code_of([&] { deserialize_embeddings(bad); }), ErrorCode::FormatError);
    bad = good;
    bad[6] = 1;
    EXPECT_EQ(code_of([&] { deserialize_embeddings(bad); }), ErrorCode::FormatError);
    for (std::size_t cut : {good.size() - 1, good.size() - 4, std::size_t{19}, std::size_t{3}}) {
        bad = std::vector<char>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_EQ(code_of([&] { deserialize_embeddings(bad); }), ErrorCode::FormatError) << cut;
    }
    bad = good;
    bad.push_back(0);
    EXPECT_EQ(code_of([&] { deserialize_embeddings(bad); }), ErrorCode::FormatError);
    bad = good;
    bad[19] = 0x7F;  // count far beyond the payload
    EXPECT_EQ(code_of([&] { deserialize_embeddings(bad); }), ErrorCode::FormatError);
}

TEST(EmbeddingStore, WidensRowsAndReportsMissing) {
    testing::TempDir dir;
    EmbeddingMatrix m;
    m.dim = 3;
    m.data = {0.1f, 0.2f, 0.3f, -1.5f, 2.25f, 1e-3f};
    write_embedding_file(dir / "sub/x.emb", m);
    const EmbeddingStore store(dir.path());
    const auto e = store.get({"sub/x.emb", 1});
    EXPECT_EQ(e[0], static_cast<double>(-1.5f));
    EXPECT_EQ(e[2], static_cast<double>(1e-3f));
    EXPECT_EQ(store.get({"sub/x.emb", 0})[0], static_cast<double>(0.1f));
    EXPECT_EQ(code_of([&] { store.get({"sub/x.emb", 2}); }), ErrorCode::MissingArtifact);
    EXPECT_EQ(code_of([&] { store.get({"nope.emb", 0}); }), ErrorCode::MissingArtifact);
}

// Manifest

std::vector<SampleRecord> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in);
}

TEST(Manifest, EmptyFileIsEmptyList) {
    EXPECT_TRUE(parse("").empty());
    EXPECT_TRUE(parse("\n  \n").empty());
}

TEST(Manifest, BadLabelReportsLine) {
    try {
        parse("{\"id\":\"a\",\"image\":\"a.png\",\"label\":0}\n{\"id\":\"b\",\"image\":\"b.png\",\"label\":2}\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(e.message().find("line 2"), std::string::npos);
    }
}

TEST(Manifest, DuplicateId) {
    EXPECT_EQ(code_of([] {
                  parse("{\"id\":\"a\",\"image\":\"a.png\",\"label\":0}\n{\"id\":\"a\",\"image\":\"b.png\",\"label\":1}\n");
              }),
              ErrorCode::DuplicateId);
}

TEST(Manifest, SchemaViolations) {
    for (const char* line : {
             "not json",
             "[1,2]",
             "{\"image\":\"a.png\",\"label\":0}",
             "{\"id\":\"a\",\"label\":0}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":\"0\"}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":0,\"caption\":\"\"}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":0,\"objects\":[{\"phrase\":\"x\",\"box\":[0.5,0,0.2,1]}]}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":0,\"objects\":[{\"phrase\":\"x\",\"box\":[0,0,1,1],\"confidence\":2}]}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":0,\"embedding_refs\":{\"object_images\":[]}}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":0,\"objects\":[{\"phrase\":\"x\",\"box\":[0,0,1,1]}],"
             "\"embedding_refs\":{\"object_phrases\":[]}}",
             "{\"id\":\"a\",\"image\":\"a.png\",\"label\":0,\"embedding_refs\":{\"global_image\":{\"file\":\"f\",\"row\":-1}}}",
         }) {
        EXPECT_EQ(code_of([&] { parse(line); }), ErrorCode::ParseError) << line;
    }
}

TEST(Manifest, FullRecordRoundTrip) {
    SampleRecord s;
    s.id = "img-1";
    s.image = "fake/img-1.png";
    s.label = Label::fake;
    s.caption = "a dog on a sofa";
    s.objects = std::vector<ObjectDetection>{{"a dog", Box{0.1, 0.2, 0.5, 0.9}, 0.75},
                                             {"a sofa", Box{0, 0.5, 1, 1}, 0.5}};
    s.embedding_refs = EmbeddingRefs{EmbeddingRef{"img.emb", 3}, EmbeddingRef{"txt.emb", 3},
                                     std::vector<EmbeddingRef>{{"obj.emb", 0}, {"obj.emb", 1}},
                                     std::vector<EmbeddingRef>{{"ph.emb", 0}, {"ph.emb", 1}}};
    SampleRecord minimal{"m", "real/m.png", Label::real, {}, {}, {}};
    testing::TempDir dir;
    write_manifest(dir / "m.jsonl", {s, minimal});
    const auto m = load_manifest(dir / "m.jsonl");
    ASSERT_EQ(m.samples.size(), 2u);
    EXPECT_EQ(m.samples[0], s);
    EXPECT_EQ(m.samples[1], minimal);
    EXPECT_EQ(m.base_dir, dir.path());
}

TEST(Manifest, MissingFile) {
    EXPECT_EQ(code_of([] { load_manifest("/nonexistent/m.jsonl"); }), ErrorCode::IoError);
}

// Run configuration

TEST(RunConfig, DefaultsAndPartialOverride) {
    const auto c = run_config_from_json(nlohmann::json::parse(R"({"fusion": {"mode": "global_only"},
        "train": {"epochs": 3, "betas": [0.8, 0.99]}, "provider": {"kind": "synthetic", "embedding_dim": 16,
        "synthetic": {"real_align_deg": 10}}})"));
    EXPECT_EQ(c.fusion.mode, FusionMode::global_only);
    EXPECT_EQ(c.fusion.w1, 1.0);
    EXPECT_EQ(c.train.epochs, 3u);
    EXPECT_EQ(c.train.beta1, 0.8);
    EXPECT_EQ(c.train.beta2, 0.99);
    EXPECT_EQ(c.train.batch_size, 64u);
    EXPECT_EQ(c.provider.embedding_dim, 16u);
    EXPECT_EQ(c.provider.synthetic.real_align_deg, 10.0);
    EXPECT_EQ(c.provider.synthetic.fake_align_deg, 60.0);
    EXPECT_EQ(c.crop_size, 224);
    EXPECT_EQ(c.detection.min_confidence, 0.3);
    EXPECT_EQ(c.detection.max_objects, 8u);
}

TEST(RunConfig, JsonRoundTripAndHash) {
    RunConfig c;
    c.provider.kind = ProviderKind::remote;
    c.provider.endpoint = "http://127.0.0.1:9";
    c.provider.artifact_root = "art";
    c.provider.synthetic.local_fake_align_deg = 33.0;
    c.fusion.w2 = 0.25;
    c.fusion.empty_object_policy = EmptyObjectPolicy::skip_sample;
    c.train.seed = 0xFFFFFFFFFFFFFFFFull;
    c.parallelism = 4;
    c.strict = true;
    const auto back = run_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(back.train.seed, c.train.seed);
    RunConfig d = c;
    d.train.seed = 1;
    EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(RunConfig, RejectsBadInput) {
    for (const char* text : {R"({"bogus": 1})", R"({"fusion": {"mode": "sideways"}})",
                             R"({"train": {"epochs": 0}})", R"({"train": {"betas": [0.9]}})",
                             R"({"provider": {"kind": "remote"}})", R"({"provider": {"embedding_dim": "x"}})",
                             R"({"fusion": {"w1": 0, "w2": 0}})", R"({"crop": {"size": 0}})",
                             R"({"provider": {"synthetic": {"colour": 1}}})"}) {
        EXPECT_EQ(code_of([&] { run_config_from_json(nlohmann::json::parse(text)); }), ErrorCode::InvalidConfig)
            << text;
    }
}

TEST(RunConfig, LoadFromFile) {
    testing::TempDir dir;
    binary::write_file(dir / "c.json", std::string_view(R"({"parallelism": 3})"));
    EXPECT_EQ(load_run_config(dir / "c.json").parallelism, 3u);
    binary::write_file(dir / "bad.json", std::string_view("{"));
    EXPECT_EQ(code_of([&] { load_run_config(dir / "bad.json"); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([&] { load_run_config(dir / "none.json"); }), ErrorCode::InvalidConfig);
}

// Utilities

TEST(Base64, KnownVectorsAndRoundTrip) {
    auto enc = [](std::string_view s) { return util::base64_encode(std::span<const char>(s.data(), s.size())); };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foo"), "Zm9v");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        std::vector<char> data(rng() % 70);
        for (auto& c : data) c = static_cast<char>(rng());
        const auto back = util::base64_decode(util::base64_encode(data));
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(*back, data);
    }
    EXPECT_FALSE(util::base64_decode("Zm9").has_value());
    EXPECT_FALSE(util::base64_decode("Zm9*").has_value());
    EXPECT_FALSE(util::base64_decode("Z===").has_value());
}

TEST(Hex16, RoundTrip) {
    EXPECT_EQ(util::hex16(0x0123456789abcdefULL), "0123456789abcdef");
    EXPECT_EQ(util::parse_hex16("0123456789abcdef"), 0x0123456789abcdefULL);
    EXPECT_FALSE(util::parse_hex16("0123").has_value());
    EXPECT_FALSE(util::parse_hex16("0123456789abcdeg").has_value());
}

TEST(FormatDouble, ShortestRoundTrip) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 1000; ++t) {
        const double v = std::normal_distribution<double>(0, 1)(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(std::stod(util::format_double(v)), v);
    }
}

}  // namespace
}  // namespace item
