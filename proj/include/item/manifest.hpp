#pragma once
// Line-delimited JSON manifest: one labeled sample per line.
//
//   {"id": "a", "image": "real/a.png", "label": 0,
//    "caption": "...",
//    "objects": [{"phrase": "...", "box": [x0, y0, x1, y1], "confidence": 0.9}],
//    "embedding_refs": {"global_image": {"file": "img.emb", "row": 0},
//                       "caption_text": {...},
//                       "object_images": [{...}], "object_phrases": [{...}]}}

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "item/classifier.hpp"
#include "item/embedding_file.hpp"
#include "item/error.hpp"
#include "item/providers.hpp"

namespace item {

struct EmbeddingRefs {
    std::optional<EmbeddingRef> global_image;
    std::optional<EmbeddingRef> caption_text;
    std::optional<std::vector<EmbeddingRef>> object_images;
    std::optional<std::vector<EmbeddingRef>> object_phrases;

    friend bool operator==(const EmbeddingRefs&, const EmbeddingRefs&) = default;
};

struct SampleRecord {
    std::string id;
    std::string image;
    Label label = Label::real;
    std::optional<std::string> caption;
    std::optional<std::vector<ObjectDetection>> objects;
    std::optional<EmbeddingRefs> embedding_refs;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
    std::vector<SampleRecord> samples;
    std::filesystem::path base_dir;  // relative image and embedding paths resolve here
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline const json& require_field(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) parse_fail(line, std::string("missing field '") + key + "'");
    return *it;
}

inline std::string require_string(const json& j, const char* key, std::size_t line) {
    const json& v = require_field(j, key, line);
    if (!v.is_string()) parse_fail(line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline EmbeddingRef parse_ref(const json& j, std::size_t line) {
    if (!j.is_object()) parse_fail(line, "embedding ref must be an object");
    EmbeddingRef r;
    r.file = require_string(j, "file", line);
    const json& row = require_field(j, "row", line);
    if (!row.is_number_unsigned() && !(row.is_number_integer() && row.get<std::int64_t>() >= 0)) {
        parse_fail(line, "embedding ref row must be a non-negative integer");
    }
    r.row = row.get<std::uint64_t>();
    return r;
}

inline std::vector<EmbeddingRef> parse_ref_list(const json& j, std::size_t line) {
    if (!j.is_array()) parse_fail(line, "embedding ref list must be an array");
    std::vector<EmbeddingRef> out;
    for (const auto& e : j) out.push_back(parse_ref(e, line));
    return out;
}

inline Box parse_box(const json& j, std::size_t line) {
    if (!j.is_array() || j.size() != 4) parse_fail(line, "box must be [x0, y0, x1, y1]");
    for (const auto& v : j) {
        if (!v.is_number()) parse_fail(line, "box entries must be numbers");
    }
    Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!b.valid()) parse_fail(line, "box violates 0 <= x0 < x1 <= 1, 0 <= y0 < y1 <= 1");
    return b;
}

inline json box_to_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }
inline json ref_to_json(const EmbeddingRef& r) { return json{{"file", r.file}, {"row", r.row}}; }

}  // namespace detail

inline SampleRecord parse_sample(const nlohmann::json& j, std::size_t line) {
    using detail::parse_fail;
    if (!j.is_object()) parse_fail(line, "record must be a JSON object");
    SampleRecord s;
    s.id = detail::require_string(j, "id", line);
    if (s.id.empty()) parse_fail(line, "id must be nonempty");
    s.image = detail::require_string(j, "image", line);
    const auto& label = detail::require_field(j, "label", line);
    if (!label.is_number_integer() || (label.get<std::int64_t>() != 0 && label.get<std::int64_t>() != 1)) {
        parse_fail(line, "label must be 0 (real) or 1 (fake)");
    }
    s.label = label.get<std::int64_t>() == 1 ? Label::fake : Label::real;

    if (auto it = j.find("caption"); it != j.end() && !it->is_null()) {
        if (!it->is_string() || it->get<std::string>().empty()) {
            parse_fail(line, "caption must be a nonempty string");
        }
        s.caption = it->get<std::string>();
    }
    if (auto it = j.find("objects"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) parse_fail(line, "objects must be an array");
        std::vector<ObjectDetection> objs;
        for (const auto& o : *it) {
            if (!o.is_object()) parse_fail(line, "object must be a JSON object");
            ObjectDetection d;
            d.phrase = detail::require_string(o, "phrase", line);
            if (d.phrase.empty()) parse_fail(line, "object phrase must be nonempty");
            d.box = detail::parse_box(detail::require_field(o, "box", line), line);
            if (auto c = o.find("confidence"); c != o.end()) {
                if (!c->is_number()) parse_fail(line, "confidence must be a number");
                d.confidence = c->get<double>();
                if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
                    parse_fail(line, "confidence must lie in [0, 1]");
                }
            }
            objs.push_back(std::move(d));
        }
        s.objects = std::move(objs);
    }
    if (auto it = j.find("embedding_refs"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) parse_fail(line, "embedding_refs must be an object");
        EmbeddingRefs refs;
        if (auto r = it->find("global_image"); r != it->end()) refs.global_image = detail::parse_ref(*r, line);
        if (auto r = it->find("caption_text"); r != it->end()) refs.caption_text = detail::parse_ref(*r, line);
        if (auto r = it->find("object_images"); r != it->end()) {
            refs.object_images = detail::parse_ref_list(*r, line);
        }
        if (auto r = it->find("object_phrases"); r != it->end()) {
            refs.object_phrases = detail::parse_ref_list(*r, line);
        }
        for (const auto* list : {&refs.object_images, &refs.object_phrases}) {
            if (!list->has_value()) continue;
            if (!s.objects) parse_fail(line, "object embedding refs given without objects");
            if ((*list)->size() != s.objects->size()) {
                parse_fail(line, "object embedding refs must match the number of objects");
            }
        }
        s.embedding_refs = std::move(refs);
    }
    return s;
}

inline nlohmann::json to_json(const SampleRecord& s) {
    using nlohmann::json;
    json j = {{"id", s.id}, {"image", s.image}, {"label", static_cast<int>(s.label)}};
    if (s.caption) j["caption"] = *s.caption;
    if (s.objects) {
        json arr = json::array();
        for (const auto& o : *s.objects) {
            arr.push_back({{"phrase", o.phrase}, {"box", detail::box_to_json(o.box)},
                           {"confidence", o.confidence}});
        }
        j["objects"] = std::move(arr);
    }
    if (s.embedding_refs) {
        json r = json::object();
        const auto& e = *s.embedding_refs;
        if (e.global_image) r["global_image"] = detail::ref_to_json(*e.global_image);
        if (e.caption_text) r["caption_text"] = detail::ref_to_json(*e.caption_text);
        auto list = [](const std::vector<EmbeddingRef>& v) {
            json a = json::array();
            for (const auto& x : v) a.push_back(detail::ref_to_json(x));
            return a;
        };
        if (e.object_images) r["object_images"] = list(*e.object_images);
        if (e.object_phrases) r["object_phrases"] = list(*e.object_phrases);
        j["embedding_refs"] = std::move(r);
    }
    return j;
}

// Records in file order. Blank lines are ignored.
inline std::vector<SampleRecord> parse_manifest(std::istream& in) {
    std::vector<SampleRecord> out;
    std::unordered_set<std::string> seen;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            detail::parse_fail(lineno, e.what());
        }
        SampleRecord s = parse_sample(j, lineno);
        if (!seen.insert(s.id).second) {
            fail(ErrorCode::DuplicateId, "line " + std::to_string(lineno) + ": id '" + s.id +
                                             "' already used");
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open manifest " + path.string());
    Manifest m;
    m.samples = parse_manifest(in);
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    binary::write_file(path, std::string_view(out.str()));
}

}  // namespace item
