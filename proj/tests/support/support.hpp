#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>

#include "charactergpt/corpus.hpp"
#include "charactergpt/gateway.hpp"
#include "charactergpt/persona.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(std::string_view rel) const { return path_ / rel; }

private:
    fs::path path_;
};

/// Synthetic corpus with `chapters` chapters. Chapter k has title
/// "Chapter k <word>" and its body carries the token "chapmark-k".
charactergpt::CharacterCorpus synthetic_corpus(const std::string& id, int chapters, std::uint64_t seed = 1);

/// Writes synthetic_corpus(id, chapters, seed) to <parent>/<id> and returns
/// that directory.
fs::path write_synthetic_corpus(const fs::path& parent, const std::string& id, int chapters,
                                std::uint64_t seed = 1);

/// Deterministic pipeline responder. Chapter extractions answer NONE with
/// probability `none_probability` (decided from the request fingerprint and
/// `seed`); otherwise chapter extractions echo "chapmark-k" and the trait
/// name, init extractions say "baseline". Generalizations and chat replies
/// carry the digest.
charactergpt::Responder pipeline_responder(std::uint64_t seed = 0, double none_probability = 0.0);

/// Mock provider using pipeline_responder.
std::unique_ptr<charactergpt::MockProvider> pipeline_mock(std::uint64_t seed = 0, double none_probability = 0.0);

/// Uniform double in [0, 1) derived from text and seed.
double unit_hash(std::string_view text, std::uint64_t seed);

/// Random valid snapshot (epoch 0..20) for round-trip tests.
charactergpt::PersonaSnapshot random_snapshot(std::mt19937_64& rng);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view content);

/// Relative path -> file bytes for every regular file under root.
std::map<std::string, std::string> tree_contents(const fs::path& root);

fs::path data_dir();
fs::path prompts_dir();

}  // namespace testsupport
