#pragma once
// Writes a labeled corpus of synthetic images plus its manifest.

#include <filesystem>
#include <string>

#include "item/binary_io.hpp"
#include "item/manifest.hpp"
#include "item/synthetic_provider.hpp"

namespace item {

struct SyntheticCorpusSpec {
    std::size_t n_real = 0;
    std::size_t n_fake = 0;
    std::string prefix = "s";  // keeps train and test corpora disjoint
};

// Images land in dir/real and dir/fake, the manifest in dir/manifest.jsonl.
// Real and fake samples alternate so any prefix of the manifest is balanced.
inline Manifest write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpusSpec& spec) {
    Manifest m;
    m.base_dir = dir;
    std::size_t r = 0, f = 0;
    while (r < spec.n_real || f < spec.n_fake) {
        const bool fake = f < spec.n_fake && (r >= spec.n_real || f < r);
        const std::size_t i = fake ? f++ : r++;
        const Label label = fake ? Label::fake : Label::real;
        SampleRecord s;
        s.id = spec.prefix + "-" + std::string(to_string(label)) + "-" + std::to_string(i);
        s.image = std::string(to_string(label)) + "/" + s.id + ".img";
        s.label = label;
        binary::write_file(dir / s.image, std::span<const char>(make_synthetic_image(label, s.id)));
        m.samples.push_back(std::move(s));
    }
    write_manifest(dir / "manifest.jsonl", m.samples);
    return m;
}

}  // namespace item
