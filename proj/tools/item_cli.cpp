// item_cli: featurize, train, eval, perturb and export representations.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "item/config.hpp"
#include "item/model_io.hpp"
#include "item/perturb.hpp"
#include "item/pipeline.hpp"
#include "item/synthetic_corpus.hpp"

namespace fs = std::filesystem;
using namespace item;

namespace {

struct GlobalOptions {
    std::optional<std::string> config;
    std::optional<std::string> provider;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    bool strict = false;
    std::string out = "out";
};

RunConfig resolve_config(const GlobalOptions& g) {
    RunConfig cfg = g.config ? load_run_config(*g.config) : RunConfig{};
    if (g.provider) cfg.provider.kind = parse_provider_kind(*g.provider);
    if (g.mode) cfg.fusion.mode = parse_fusion_mode(*g.mode);
    if (g.seed) cfg.train.seed = *g.seed;
    if (g.strict) cfg.strict = true;
    cfg.validate();
    return cfg;
}

void report_failures(const CorpusFeatures& f) {
    for (const auto& e : f.failures) {
        std::cerr << "skipped " << e.id << ": " << to_string(e.code) << ": " << e.message << '\n';
    }
}

int exit_code(ErrorCode c) {
    switch (category(c)) {
        case ErrorCategory::Usage: return 1;
        case ErrorCategory::Provider: return 3;
        default: return 2;
    }
}

int cmd_featurize(const GlobalOptions& g, const std::string& manifest_path) {
    const auto cfg = resolve_config(g);
    const auto m = load_manifest(manifest_path);
    const auto features = featurize_corpus(m, make_context(cfg, m));
    report_failures(features);
    const fs::path out = g.out;
    fs::create_directories(out);
    detail::write_augmented(out, m, features, cfg);
    export_representations(features.records, out / "representations.csv");
    detail::write_json(out / "featurize_meta.json",
                       {{"stage", "featurize"},
                        {"config_hash", config_hash(cfg)},
                        {"config", to_json(cfg)},
                        {"sample_count", features.records.size()},
                        {"failed_count", features.failures.size()},
                        {"failures", detail::failures_json(features.failures)}});
    std::cout << "featurized " << features.records.size() << " samples, " << features.failures.size()
              << " failed\n";
    return 0;
}

int cmd_export(const GlobalOptions& g, const std::string& manifest_path) {
    const auto cfg = resolve_config(g);
    const auto m = load_manifest(manifest_path);
    const auto features = featurize_corpus(m, make_context(cfg, m));
    report_failures(features);
    fs::create_directories(g.out);
    const auto path = fs::path(g.out) / "representations.csv";
    export_representations(features.records, path);
    std::cout << "wrote " << features.records.size() << " rows to " << path.string() << '\n';
    return 0;
}

int cmd_train(const GlobalOptions& g, const std::string& manifest_path) {
    const auto cfg = resolve_config(g);
    const auto m = load_manifest(manifest_path);
    const auto outcome = run_training(m, make_context(cfg, m), g.out);
    report_failures(outcome.features);
    std::cout << "trained on " << outcome.features.records.size() << " samples, model "
              << outcome.model_path.string() << '\n';
    return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& manifest_path, const std::string& model_path) {
    const auto cfg = resolve_config(g);
    const auto m = load_manifest(manifest_path);
    const auto head = load_head(model_path);
    const auto ev = run_eval(m, make_context(cfg, m), head, g.out);
    report_failures(ev.features);
    std::printf("ACC %.4f AP %.4f (n_real %zu, n_fake %zu)\n", ev.report.acc, ev.report.ap, ev.report.n_real,
                ev.report.n_fake);
    return 0;
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* e : {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}) {
        if (ext == e) return true;
    }
    return false;
}

// Noise and blur outputs are 16-bit PNG so sub-level changes survive. JPEG
// output is the encoded file itself. Each noise image gets its own seed,
// derived from the run seed and its relative path.
int cmd_perturb(const GlobalOptions& g, const std::string& kind, double param, const std::string& in_dir) {
    PerturbationSpec spec;
    if (kind == "noise") {
        spec.kind = PerturbationKind::gaussian_noise;
    } else if (kind == "blur") {
        spec.kind = PerturbationKind::gaussian_blur;
    } else if (kind == "jpeg") {
        spec.kind = PerturbationKind::jpeg;
    } else {
        fail(ErrorCode::InvalidConfig, "unknown perturbation kind '" + kind + "'");
    }
    spec.param = param;
    spec.seed = g.seed.value_or(0);
    spec.validate();
    if (!fs::is_directory(in_dir)) fail(ErrorCode::IoError, "input directory " + in_dir + " not found");

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t written = 0, skipped = 0;
    for (const auto& src : files) {
        const auto rel = src.lexically_relative(in_dir);
        fs::path dst = fs::path(g.out) / rel;
        try {
            const Image img = read_image(src);
            fs::create_directories(dst.parent_path());
            if (spec.kind == PerturbationKind::jpeg) {
                dst.replace_extension(".jpg");
                binary::write_file(dst, encode_jpeg(img, static_cast<int>(param)));
            } else {
                PerturbationSpec per = spec;
                per.seed = util::mix(spec.seed, util::fnv1a64(std::string_view(rel.generic_string())));
                dst.replace_extension(".png");
                binary::write_file(dst, encode_png(apply_perturbation(img, per), 16));
            }
            ++written;
        } catch (const Error& e) {
            if (g.strict || category(e.code()) != ErrorCategory::Data) throw;
            std::cerr << "skipped " << rel.generic_string() << ": " << e.what() << '\n';
            ++skipped;
        }
    }
    std::cout << "perturbed " << written << " images, skipped " << skipped << '\n';
    return 0;
}

int cmd_synth(const GlobalOptions& g, std::size_t n_real, std::size_t n_fake, const std::string& prefix) {
    const auto m = write_synthetic_corpus(g.out, {n_real, n_fake, prefix});
    std::cout << "wrote " << m.samples.size() << " samples to " << (fs::path(g.out) / "manifest.jsonl").string()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fake-image detection from image-text misalignment"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--provider", g.provider, "synthetic, file or remote");
    app.add_option("--mode", g.mode, "global_only, local_only or both");
    app.add_option("--seed", g.seed, "training seed (noise seed for perturb)");
    app.add_flag("--strict", g.strict, "abort on the first failed sample");
    app.add_option("--out", g.out, "output directory");

    std::string manifest, model, kind, in_dir, prefix = "s";
    double param = 0.0;
    std::size_t n_real = 0, n_fake = 0;

    auto* featurize = app.add_subcommand("featurize", "featurize a manifest");
    featurize->add_option("manifest", manifest)->required();
    auto* train = app.add_subcommand("train", "featurize and train the classifier");
    train->add_option("manifest", manifest)->required();
    auto* eval = app.add_subcommand("eval", "score a manifest with a trained model");
    eval->add_option("manifest", manifest)->required();
    eval->add_option("--model", model, "model.itmc from train")->required();
    auto* exp = app.add_subcommand("export-reps", "write combined representations as CSV");
    exp->add_option("manifest", manifest)->required();
    auto* perturb = app.add_subcommand("perturb", "perturb every image under a directory");
    perturb->add_option("--kind", kind, "noise, blur or jpeg")->required();
    perturb->add_option("--param", param, "noise sigma, blur sigma in pixels, or JPEG quality")->required();
    perturb->add_option("--in", in_dir, "input directory")->required();
    auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
    synth->add_option("--n-real", n_real)->required();
    synth->add_option("--n-fake", n_fake)->required();
    synth->add_option("--prefix", prefix);
    for (auto* sub : {featurize, train, eval, exp, perturb, synth}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*featurize) return cmd_featurize(g, manifest);
        if (*train) return cmd_train(g, manifest);
        if (*eval) return cmd_eval(g, manifest, model);
        if (*exp) return cmd_export(g, manifest);
        if (*perturb) return cmd_perturb(g, kind, param, in_dir);
        if (*synth) return cmd_synth(g, n_real, n_fake, prefix);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
