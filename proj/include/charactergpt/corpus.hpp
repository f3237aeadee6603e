#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "charactergpt/persona.hpp"
#include "charactergpt/tokenizer.hpp"

namespace charactergpt {

struct ChapterSummary {
    int index = 0;  // 1-based, contiguous within a corpus
    std::string title;
    std::string body;

    /// Stable identifier used as TraitEntry::source_chapter_id, e.g. "ch003".
    std::string id() const;

    bool operator==(const ChapterSummary&) const = default;
};

struct CharacterCorpus {
    CharacterId character_id;
    std::string display_name;
    std::string language_tag = "en";
    std::string info_doc;
    std::vector<ChapterSummary> chapters;
    std::vector<std::string> dialogue_lines;

    const ChapterSummary& chapter(int index) const;

    bool operator==(const CharacterCorpus&) const = default;
};

struct CorpusLoadOptions {
    /// Chapters are extracted in one call each; anything larger is rejected
    /// instead of being truncated.
    std::size_t max_chapter_tokens = 32000;
    const Tokenizer* tokenizer = nullptr;  // defaults to default_tokenizer()
};

/// Reads the directory layout
///   <root>/info.md
///   <root>/character.json          (optional: display_name, language_tag)
///   <root>/chapters/NNN_<slug>.md  (NNN = 1-based index; optional "# Title" first line)
///   <root>/dialogue/*.txt          (one utterance per line; optional)
/// The character id is the directory name.
CharacterCorpus load_corpus(const std::filesystem::path& root, const CorpusLoadOptions& options = {});

/// Writes a corpus in the layout load_corpus reads.
void save_corpus(const CharacterCorpus& corpus, const std::filesystem::path& root);

struct CorpusStats {
    std::size_t chapter_count = 0;
    std::size_t novel_tokens = 0;
    std::size_t info_tokens = 0;
    std::size_t refined_info_tokens = 0;  // from the initialization persona
    std::size_t dialogue_tokens = 0;
    std::size_t trained_tokens = 0;

    bool operator==(const CorpusStats&) const = default;
};

CorpusStats compute_stats(const CharacterCorpus& corpus, const PersonaSnapshot* snapshot = nullptr,
                          const Tokenizer& tokenizer = default_tokenizer());

nlohmann::ordered_json to_json(const CorpusStats& stats);

}  // namespace charactergpt
