#pragma once
// Run configuration and its JSON form. Every key is optional; missing keys
// keep their defaults and unknown keys are rejected.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "item/classifier.hpp"
#include "item/error.hpp"
#include "item/providers.hpp"
#include "item/representation.hpp"
#include "item/util.hpp"

namespace item {

// Which detections take part in the local distance.
struct DetectionPolicy {
    double min_confidence = 0.3;
    std::size_t max_objects = 8;
};

struct RunConfig {
    ProviderConfig provider;
    FusionConfig fusion;
    TrainConfig train;
    int crop_size = 224;
    DetectionPolicy detection;
    std::size_t parallelism = 1;
    bool strict = false;

    void validate() const {
        provider.validate();
        fusion.validate();
        train.validate();
        if (crop_size < 1) fail(ErrorCode::InvalidConfig, "crop size must be >= 1");
        if (parallelism < 1) fail(ErrorCode::InvalidConfig, "parallelism must be >= 1");
        if (!(detection.min_confidence >= 0.0 && detection.min_confidence <= 1.0)) {
            fail(ErrorCode::InvalidConfig, "min_confidence must lie in [0, 1]");
        }
    }
};

inline std::string_view to_string(ProviderKind k) noexcept {
    switch (k) {
        case ProviderKind::synthetic: return "synthetic";
        case ProviderKind::file: return "file";
        case ProviderKind::remote: return "remote";
    }
    return "?";
}

inline std::string_view to_string(FusionMode m) noexcept {
    switch (m) {
        case FusionMode::global_only: return "global_only";
        case FusionMode::local_only: return "local_only";
        case FusionMode::both: return "both";
    }
    return "?";
}

inline ProviderKind parse_provider_kind(std::string_view s) {
    if (s == "synthetic") return ProviderKind::synthetic;
    if (s == "file") return ProviderKind::file;
    if (s == "remote") return ProviderKind::remote;
    fail(ErrorCode::InvalidConfig, "unknown provider kind '" + std::string(s) + "'");
}

inline FusionMode parse_fusion_mode(std::string_view s) {
    if (s == "global_only") return FusionMode::global_only;
    if (s == "local_only") return FusionMode::local_only;
    if (s == "both") return FusionMode::both;
    fail(ErrorCode::InvalidConfig, "unknown fusion mode '" + std::string(s) + "'");
}

inline EmptyObjectPolicy parse_empty_policy(std::string_view s) {
    if (s == "zero_local") return EmptyObjectPolicy::zero_local;
    if (s == "skip_sample") return EmptyObjectPolicy::skip_sample;
    fail(ErrorCode::InvalidConfig, "unknown empty_object_policy '" + std::string(s) + "'");
}

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) fail(ErrorCode::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
    }
}

template <typename T>
void read_into(const json& j, const char* key, std::optional<T>& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    T v{};
    read_into(j, key, v);
    out = v;
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    const auto& p = c.provider;
    json synthetic = {{"seed", p.synthetic.seed},
                      {"real_align_deg", p.synthetic.real_align_deg},
                      {"fake_align_deg", p.synthetic.fake_align_deg},
                      {"noise_deg", p.synthetic.noise_deg},
                      {"objects_per_image", p.synthetic.objects_per_image},
                      {"gap_weight", p.synthetic.gap_weight},
                      {"local_real_align_deg", p.synthetic.local_real_align_deg
                                                   ? json(*p.synthetic.local_real_align_deg)
                                                   : json(nullptr)},
                      {"local_fake_align_deg", p.synthetic.local_fake_align_deg
                                                   ? json(*p.synthetic.local_fake_align_deg)
                                                   : json(nullptr)}};
    json provider = {{"kind", to_string(p.kind)},
                     {"embedding_dim", p.embedding_dim},
                     {"endpoint", p.endpoint ? json(*p.endpoint) : json(nullptr)},
                     {"artifact_root", p.artifact_root ? json(p.artifact_root->generic_string())
                                                       : json(nullptr)},
                     {"timeout_s", p.timeout_s},
                     {"max_inflight", p.max_inflight},
                     {"synthetic", synthetic}};
    json fusion = {{"w1", c.fusion.w1},
                   {"w2", c.fusion.w2},
                   {"mode", to_string(c.fusion.mode)},
                   {"empty_object_policy", c.fusion.empty_object_policy == EmptyObjectPolicy::zero_local
                                               ? "zero_local"
                                               : "skip_sample"}};
    json train = {{"epochs", c.train.epochs},
                  {"learning_rate", c.train.learning_rate},
                  {"weight_decay", c.train.weight_decay},
                  {"batch_size", c.train.batch_size},
                  {"hidden_dim", c.train.hidden_dim},
                  {"seed", c.train.seed},
                  {"betas", json::array({c.train.beta1, c.train.beta2})},
                  {"eps", c.train.eps}};
    return json{{"provider", provider},
                {"fusion", fusion},
                {"train", train},
                {"crop", {{"size", c.crop_size}}},
                {"detection",
                 {{"min_confidence", c.detection.min_confidence}, {"max_objects", c.detection.max_objects}}},
                {"parallelism", c.parallelism},
                {"strict", c.strict}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    using detail::read_into;
    RunConfig c;
    detail::only_keys(j, {"provider", "fusion", "train", "crop", "detection", "parallelism", "strict"},
                      "config");
    if (auto it = j.find("provider"); it != j.end()) {
        const auto& p = *it;
        detail::only_keys(p, {"kind", "embedding_dim", "endpoint", "artifact_root", "timeout_s",
                              "max_inflight", "synthetic"},
                          "provider");
        std::string kind(to_string(c.provider.kind));
        read_into(p, "kind", kind);
        c.provider.kind = parse_provider_kind(kind);
        read_into(p, "embedding_dim", c.provider.embedding_dim);
        read_into(p, "endpoint", c.provider.endpoint);
        std::optional<std::string> root;
        read_into(p, "artifact_root", root);
        if (root) c.provider.artifact_root = *root;
        read_into(p, "timeout_s", c.provider.timeout_s);
        read_into(p, "max_inflight", c.provider.max_inflight);
        if (auto s = p.find("synthetic"); s != p.end()) {
            detail::only_keys(*s, {"seed", "real_align_deg", "fake_align_deg", "noise_deg",
                                   "objects_per_image", "gap_weight", "local_real_align_deg",
                                   "local_fake_align_deg"},
                              "provider.synthetic");
            auto& sp = c.provider.synthetic;
            read_into(*s, "seed", sp.seed);
            read_into(*s, "real_align_deg", sp.real_align_deg);
            read_into(*s, "fake_align_deg", sp.fake_align_deg);
            read_into(*s, "noise_deg", sp.noise_deg);
            read_into(*s, "objects_per_image", sp.objects_per_image);
            read_into(*s, "gap_weight", sp.gap_weight);
            read_into(*s, "local_real_align_deg", sp.local_real_align_deg);
            read_into(*s, "local_fake_align_deg", sp.local_fake_align_deg);
        }
    }
    if (auto it = j.find("fusion"); it != j.end()) {
        detail::only_keys(*it, {"w1", "w2", "mode", "empty_object_policy"}, "fusion");
        read_into(*it, "w1", c.fusion.w1);
        read_into(*it, "w2", c.fusion.w2);
        std::optional<std::string> mode, policy;
        read_into(*it, "mode", mode);
        read_into(*it, "empty_object_policy", policy);
        if (mode) c.fusion.mode = parse_fusion_mode(*mode);
        if (policy) c.fusion.empty_object_policy = parse_empty_policy(*policy);
    }
    if (auto it = j.find("train"); it != j.end()) {
        detail::only_keys(*it, {"epochs", "learning_rate", "weight_decay", "batch_size", "hidden_dim",
                                "seed", "betas", "eps"},
                          "train");
        read_into(*it, "epochs", c.train.epochs);
        read_into(*it, "learning_rate", c.train.learning_rate);
        read_into(*it, "weight_decay", c.train.weight_decay);
        read_into(*it, "batch_size", c.train.batch_size);
        read_into(*it, "hidden_dim", c.train.hidden_dim);
        read_into(*it, "seed", c.train.seed);
        read_into(*it, "eps", c.train.eps);
        std::optional<std::vector<double>> betas;
        read_into(*it, "betas", betas);
        if (betas) {
            if (betas->size() != 2) fail(ErrorCode::InvalidConfig, "betas must have two entries");
            c.train.beta1 = (*betas)[0];
            c.train.beta2 = (*betas)[1];
        }
    }
    if (auto it = j.find("crop"); it != j.end()) {
        detail::only_keys(*it, {"size"}, "crop");
        read_into(*it, "size", c.crop_size);
    }
    if (auto it = j.find("detection"); it != j.end()) {
        detail::only_keys(*it, {"min_confidence", "max_objects"}, "detection");
        read_into(*it, "min_confidence", c.detection.min_confidence);
        read_into(*it, "max_objects", c.detection.max_objects);
    }
    read_into(j, "parallelism", c.parallelism);
    read_into(j, "strict", c.strict);
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::InvalidConfig, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    return run_config_from_json(j);
}

// Stable fingerprint of a configuration (keys are serialized in sorted order).
inline std::string config_hash(const RunConfig& c) {
    return util::hex16(util::fnv1a64(std::string_view(to_json(c).dump())));
}

}  // namespace item
