#pragma once
// Featurization, training and evaluation over a manifest.
//
// Per sample: caption (unless cached) -> global image/caption embeddings ->
// global distance -> object grounding (unless cached) -> per-object local
// distances -> mean local distance -> weighted combination. Cached captions,
// objects and embedding refs in the manifest always take precedence over
// provider calls.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "item/classifier.hpp"
#include "item/config.hpp"
#include "item/embedding_file.hpp"
#include "item/file_provider.hpp"
#include "item/manifest.hpp"
#include "item/metrics.hpp"
#include "item/model_io.hpp"
#include "item/providers.hpp"
#include "item/remote_provider.hpp"
#include "item/representation.hpp"
#include "item/synthetic_provider.hpp"
#include "item/util.hpp"

namespace item {

struct RepresentationRecord {
    std::string id;
    Label label = Label::real;
    Misalignment d_global;
    Misalignment d_local;
    Misalignment d_combined;
    std::size_t n_objects = 0;

    friend bool operator==(const RepresentationRecord&, const RepresentationRecord&) = default;
};

struct SampleFailure {
    std::size_t index = 0;  // position in the manifest
    std::string id;
    ErrorCode code = ErrorCode::InvalidInput;
    std::string message;
};

struct FeaturizeContext {
    Providers providers;
    RunConfig cfg;
    std::filesystem::path image_root;
    std::shared_ptr<const EmbeddingStore> store;
};

struct FeaturizeResult {
    RepresentationRecord rep;
    SampleRecord augmented;  // input record plus any caption/objects computed on the fly
};

struct CorpusFeatures {
    std::vector<RepresentationRecord> records;
    std::vector<SampleRecord> augmented;  // one per manifest sample, in manifest order
    std::vector<SampleFailure> failures;
};

inline std::filesystem::path artifact_root_for(const RunConfig& cfg, const Manifest& m) {
    if (!cfg.provider.artifact_root) return m.base_dir;
    const auto& root = *cfg.provider.artifact_root;
    return root.is_absolute() ? root : m.base_dir / root;
}

inline Providers make_providers(const RunConfig& cfg, const Manifest& m,
                                std::shared_ptr<const EmbeddingStore> store) {
    cfg.provider.validate();
    switch (cfg.provider.kind) {
        case ProviderKind::synthetic:
            return Providers::from(
                std::make_shared<SyntheticProvider>(cfg.provider.embedding_dim, cfg.provider.synthetic));
        case ProviderKind::file:
            return Providers::from(
                std::make_shared<FileProvider>(m, cfg.provider.embedding_dim, std::move(store)));
        case ProviderKind::remote:
            return Providers::from(std::make_shared<RemoteProvider>(cfg.provider, cfg.crop_size));
    }
    fail(ErrorCode::InvalidConfig, "unknown provider kind");
}

inline FeaturizeContext make_context(const RunConfig& cfg, const Manifest& m) {
    cfg.validate();
    auto store = std::make_shared<const EmbeddingStore>(artifact_root_for(cfg, m));
    return FeaturizeContext{make_providers(cfg, m, store), cfg, m.base_dir, store};
}

// Indices of the detections that take part in the local distance: confidence
// at or above the floor, highest confidence first, at most max_objects.
inline std::vector<std::size_t> select_objects(const std::vector<ObjectDetection>& objects,
                                               const DetectionPolicy& policy) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (objects[i].confidence >= policy.min_confidence) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return objects[a].confidence > objects[b].confidence;
    });
    if (idx.size() > policy.max_objects) idx.resize(policy.max_objects);
    return idx;
}

inline FeaturizeResult featurize_sample(const SampleRecord& sample, const FeaturizeContext& ctx) {
    const auto& p = ctx.providers;
    const auto& cfg = ctx.cfg;
    const std::size_t dim = cfg.provider.embedding_dim;
    const std::filesystem::path image_path = std::filesystem::path(sample.image).is_absolute()
                                                 ? std::filesystem::path(sample.image)
                                                 : ctx.image_root / sample.image;
    const ImageRef image = ImageRef::file(image_path);
    const EmbeddingRefs refs = sample.embedding_refs.value_or(EmbeddingRefs{});

    FeaturizeResult out;
    out.augmented = sample;

    auto caption = [&]() -> const std::string& {
        if (!out.augmented.caption) out.augmented.caption = p.captioner->caption(image);
        return *out.augmented.caption;
    };
    auto stored = [&](const EmbeddingRef& r, std::string_view what) {
        Embedding e = ctx.store->get(r);
        check_embedding_dim(e, dim, what);
        return e;
    };

    const Embedding image_emb = refs.global_image ? stored(*refs.global_image, "global image embedding")
                                                  : p.encoder->embed_image(image);
    const Embedding text_emb = refs.caption_text ? stored(*refs.caption_text, "caption embedding")
                                                 : p.encoder->embed_text(caption());
    check_embedding_dim(image_emb, dim, "image embedding");
    check_embedding_dim(text_emb, dim, "caption embedding");
    const Misalignment d_global = global_distance(image_emb, text_emb);

    std::vector<Misalignment> locals;
    // Global-only runs never need the detector.
    if (cfg.fusion.mode != FusionMode::global_only) {
        if (!out.augmented.objects) out.augmented.objects = p.detector->detect_objects(image, caption());
        const auto& objects = *out.augmented.objects;
        for (const auto& o : objects) validate_detection(o, {}, ErrorCode::InvalidInput);
        for (std::size_t i : select_objects(objects, cfg.detection)) {
            const auto& o = objects[i];
            const Embedding obj_img = refs.object_images
                                          ? stored((*refs.object_images)[i], "object image embedding")
                                          : p.encoder->embed_image(image.with_region(o.box));
            const Embedding obj_txt = refs.object_phrases
                                          ? stored((*refs.object_phrases)[i], "object phrase embedding")
                                          : p.encoder->embed_text(o.phrase);
            locals.push_back(local_distance(obj_img, obj_txt));
        }
    }
    const EmptyObjectPolicy policy = cfg.fusion.mode == FusionMode::global_only
                                         ? EmptyObjectPolicy::zero_local
                                         : cfg.fusion.empty_object_policy;
    Misalignment d_local = average_local(locals, policy, dim);

    out.rep.id = sample.id;
    out.rep.label = sample.label;
    out.rep.n_objects = locals.size();
    out.rep.d_combined = combine(d_global, d_local, cfg.fusion);
    out.rep.d_global = d_global;
    out.rep.d_local = std::move(d_local);
    return out;
}

inline RepresentationRecord featurize(const SampleRecord& sample, const FeaturizeContext& ctx) {
    return featurize_sample(sample, ctx).rep;
}

// Output follows manifest order for any parallelism. Failed samples land in
// `failures`; with cfg.strict the first failure (in manifest order) aborts.
inline CorpusFeatures featurize_corpus(const Manifest& manifest, const FeaturizeContext& ctx) {
    const auto& samples = manifest.samples;
    if (samples.empty()) fail(ErrorCode::EmptyInput, "manifest has no samples");
    const std::size_t n = samples.size();
    std::vector<std::optional<FeaturizeResult>> results(n);
    std::vector<std::optional<SampleFailure>> failures(n);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                results[i] = featurize_sample(samples[i], ctx);
            } catch (const Error& e) {
                failures[i] = SampleFailure{i, samples[i].id, e.code(), e.message()};
            } catch (const std::exception& e) {
                failures[i] = SampleFailure{i, samples[i].id, ErrorCode::InvalidInput, e.what()};
            }
        }
    };
    const std::size_t threads = std::min(ctx.cfg.parallelism, n);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    CorpusFeatures out;
    for (std::size_t i = 0; i < n; ++i) {
        if (failures[i]) {
            if (ctx.cfg.strict) {
                fail(failures[i]->code, "sample '" + failures[i]->id + "': " + failures[i]->message);
            }
            out.failures.push_back(std::move(*failures[i]));
            out.augmented.push_back(samples[i]);
        } else {
            out.records.push_back(std::move(results[i]->rep));
            out.augmented.push_back(std::move(results[i]->augmented));
        }
    }
    if (out.records.empty()) {
        fail(ErrorCode::AllSamplesFailed, "all " + std::to_string(n) + " samples failed; first: " +
                                              out.failures.front().id + ": " + out.failures.front().message);
    }
    return out;
}

inline std::vector<Example> to_examples(const std::vector<RepresentationRecord>& records) {
    std::vector<Example> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(Example{r.d_combined, r.label});
    return out;
}

namespace detail {

inline void require_both_labels(const std::vector<Label>& labels, const char* where) {
    const bool has_real = std::find(labels.begin(), labels.end(), Label::real) != labels.end();
    const bool has_fake = std::find(labels.begin(), labels.end(), Label::fake) != labels.end();
    if (!has_real || !has_fake) {
        fail(ErrorCode::SingleClassDataset, std::string(where) + " needs both real and fake samples");
    }
}

inline nlohmann::json failures_json(const std::vector<SampleFailure>& failures) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : failures) {
        arr.push_back({{"id", f.id}, {"code", to_string(f.code)}, {"message", f.message}});
    }
    return arr;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    binary::write_file(path, std::string_view(j.dump(2) + "\n"));
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one CSV line honouring double-quoted fields.
inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

// Relative image paths (and embedding files, when they live under the
// manifest directory) are rewritten so the copy resolves from `out_dir`.
inline std::vector<SampleRecord> rebased(std::vector<SampleRecord> records, const std::filesystem::path& from,
                                         const std::filesystem::path& out_dir, bool rebase_refs) {
    namespace fs = std::filesystem;
    const fs::path src = fs::absolute(from).lexically_normal();
    const fs::path dst = fs::absolute(out_dir).lexically_normal();
    auto move = [&](const std::string& p) {
        if (fs::path(p).is_absolute()) return p;
        const auto rel = (src / p).lexically_normal().lexically_relative(dst);
        return rel.empty() ? (src / p).lexically_normal().generic_string() : rel.generic_string();
    };
    for (auto& r : records) {
        r.image = move(r.image);
        if (!rebase_refs || !r.embedding_refs) continue;
        auto& e = *r.embedding_refs;
        for (auto* ref : {&e.global_image, &e.caption_text}) {
            if (*ref) (*ref)->file = move((*ref)->file);
        }
        for (auto* list : {&e.object_images, &e.object_phrases}) {
            if (*list) {
                for (auto& ref : **list) ref.file = move(ref.file);
            }
        }
    }
    return records;
}

inline void write_augmented(const std::filesystem::path& out_dir, const Manifest& manifest,
                            const CorpusFeatures& features, const RunConfig& cfg) {
    write_manifest(out_dir / "manifest.augmented.jsonl",
                   rebased(features.augmented, manifest.base_dir, out_dir, !cfg.provider.artifact_root));
}

}  // namespace detail

struct TrainingOutcome {
    std::filesystem::path model_path;
    MlpHead head;
    CorpusFeatures features;
};

// Featurize, train, and write model.itmc, run_meta.json and the augmented
// manifest into `out_dir`.
inline TrainingOutcome run_training(const Manifest& manifest, const FeaturizeContext& ctx,
                                    const std::filesystem::path& out_dir) {
    ctx.cfg.validate();
    std::vector<Label> labels;
    for (const auto& s : manifest.samples) labels.push_back(s.label);
    detail::require_both_labels(labels, "training manifest");

    TrainingOutcome out;
    out.features = featurize_corpus(manifest, ctx);
    labels.clear();
    for (const auto& r : out.features.records) labels.push_back(r.label);
    detail::require_both_labels(labels, "featurized training set");

    const auto examples = to_examples(out.features.records);
    out.head = train(examples, ctx.cfg.train);

    std::filesystem::create_directories(out_dir);
    out.model_path = out_dir / "model.itmc";
    save_head(out.head, out.model_path);
    detail::write_augmented(out_dir, manifest, out.features, ctx.cfg);
    detail::write_json(out_dir / "run_meta.json",
                       {{"stage", "train"},
                        {"config_hash", config_hash(ctx.cfg)},
                        {"config", to_json(ctx.cfg)},
                        {"seed", ctx.cfg.train.seed},
                        {"sample_count", out.features.records.size()},
                        {"failed_count", out.features.failures.size()},
                        {"failures", detail::failures_json(out.features.failures)},
                        {"input_dim", out.head.input_dim},
                        {"hidden_dim", out.head.hidden_dim},
                        {"model", out.model_path.filename().string()}});
    return out;
}

struct EvalOutcome {
    MetricsReport report;
    std::vector<ScoredSample> scores;
    CorpusFeatures features;
};

inline std::vector<ScoredSample> score_records(const MlpHead& head,
                                               const std::vector<RepresentationRecord>& records) {
    std::vector<ScoredSample> scores;
    scores.reserve(records.size());
    for (const auto& r : records) scores.push_back({r.id, predict(head, r.d_combined).prob_fake, r.label});
    return scores;
}

// Featurize, score, and write scores.csv, metrics.json, eval_meta.json and
// the augmented manifest into `out_dir`.
inline EvalOutcome run_eval(const Manifest& manifest, const FeaturizeContext& ctx, const MlpHead& head,
                            const std::filesystem::path& out_dir) {
    if (head.input_dim != ctx.cfg.provider.embedding_dim) {
        fail(ErrorCode::DimensionMismatch, "model expects dim " + std::to_string(head.input_dim) +
                                               " but provider produces " +
                                               std::to_string(ctx.cfg.provider.embedding_dim));
    }
    EvalOutcome out;
    out.features = featurize_corpus(manifest, ctx);
    out.scores = score_records(head, out.features.records);
    out.report = evaluate_scores(out.scores);

    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    csv << "id,label,prob_fake,predicted\n";
    for (const auto& s : out.scores) {
        csv << detail::csv_field(s.id) << ',' << static_cast<int>(s.label) << ','
            << util::format_double(s.score) << ',' << static_cast<int>(classify(s.score)) << '\n';
    }
    binary::write_file(out_dir / "scores.csv", std::string_view(csv.str()));
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& pt : out.report.pr_points) pr.push_back({pt.recall, pt.precision});
    detail::write_json(out_dir / "metrics.json", {{"acc", out.report.acc},
                                                  {"ap", out.report.ap},
                                                  {"n_real", out.report.n_real},
                                                  {"n_fake", out.report.n_fake},
                                                  {"threshold", kDecisionThreshold},
                                                  {"pr_curve", pr}});
    detail::write_augmented(out_dir, manifest, out.features, ctx.cfg);
    detail::write_json(out_dir / "eval_meta.json",
                       {{"stage", "eval"},
                        {"config_hash", config_hash(ctx.cfg)},
                        {"config", to_json(ctx.cfg)},
                        {"sample_count", out.features.records.size()},
                        {"failed_count", out.features.failures.size()},
                        {"failures", detail::failures_json(out.features.failures)}});
    return out;
}

// CSV of the combined representation: id,label,n_objects,d_0..d_{dim-1}.
inline void export_representations(const std::vector<RepresentationRecord>& records,
                                   const std::filesystem::path& path) {
    if (records.empty()) fail(ErrorCode::EmptyExport, "no representations to export");
    const std::size_t dim = records.front().d_combined.dim();
    std::ostringstream out;
    out << "id,label,n_objects";
    for (std::size_t i = 0; i < dim; ++i) out << ",d_" << i;
    out << '\n';
    for (const auto& r : records) {
        if (r.d_combined.dim() != dim) fail(ErrorCode::DimensionMismatch, "records differ in dim");
        out << detail::csv_field(r.id) << ',' << static_cast<int>(r.label) << ',' << r.n_objects;
        for (double v : r.d_combined.values()) out << ',' << util::format_double(v);
        out << '\n';
    }
    binary::write_file(path, std::string_view(out.str()));
}

struct ExportedRepresentation {
    std::string id;
    Label label = Label::real;
    std::size_t n_objects = 0;
    std::vector<double> values;
};

inline std::vector<ExportedRepresentation> read_representations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::ParseError, "missing CSV header");
    const std::size_t columns = detail::csv_split(line).size();
    if (columns < 4) fail(ErrorCode::ParseError, "CSV header has too few columns");
    std::vector<ExportedRepresentation> out;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto f = detail::csv_split(line);
        if (f.size() != columns) {
            fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": wrong column count");
        }
        ExportedRepresentation r;
        r.id = f[0];
        if (f[1] != "0" && f[1] != "1") fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": bad label");
        r.label = f[1] == "1" ? Label::fake : Label::real;
        r.n_objects = std::stoul(f[2]);
        for (std::size_t i = 3; i < f.size(); ++i) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(f[i].data(), f[i].data() + f[i].size(), v);
            if (ec != std::errc{} || p != f[i].data() + f[i].size()) {
                fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": bad number '" + f[i] + "'");
            }
            r.values.push_back(v);
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace item
