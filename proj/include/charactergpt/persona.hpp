#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charactergpt/tokenizer.hpp"

namespace charactergpt {

inline constexpr int kSnapshotSchemaVersion = 1;

enum class TraitKey {
    personality,
    physical_description,
    motivations,
    backstory,
    emotions,
    relationships,
    growth_and_change,
    conflict,
};

/// Internal traits are generalized and replaced each epoch; external traits
/// accumulate chronologically.
enum class TraitKind { type_a, type_b };

/// Canonical order, used for rendering and serialization.
inline constexpr std::array<TraitKey, 8> kAllTraits = {
    TraitKey::personality, TraitKey::physical_description, TraitKey::motivations,
    TraitKey::backstory,   TraitKey::emotions,             TraitKey::relationships,
    TraitKey::growth_and_change, TraitKey::conflict,
};

/// Traits built during initialization. Emotions, growth and change, and
/// conflict only make sense once the story moves, so they are left to training.
inline constexpr std::array<TraitKey, 5> kInitTraits = {
    TraitKey::personality, TraitKey::physical_description, TraitKey::motivations,
    TraitKey::backstory,   TraitKey::relationships,
};

constexpr TraitKind kind_of(TraitKey key) noexcept {
    switch (key) {
        case TraitKey::personality:
        case TraitKey::physical_description:
        case TraitKey::motivations:
            return TraitKind::type_a;
        default:
            return TraitKind::type_b;
    }
}

constexpr bool is_init_trait(TraitKey key) noexcept {
    for (auto k : kInitTraits) {
        if (k == key) return true;
    }
    return false;
}

std::string_view to_string(TraitKey key) noexcept;
std::string_view to_string(TraitKind kind) noexcept;
std::optional<TraitKey> parse_trait_key(std::string_view name) noexcept;
std::optional<TraitKind> parse_trait_kind(std::string_view name) noexcept;

/// Human-readable heading, e.g. "Growth and Change".
std::string_view display_name(TraitKey key) noexcept;
/// Short definition handed to extraction and generalization prompts.
std::string_view definition(TraitKey key) noexcept;

/// Validated character identifier. Used as a directory name, so restricted to
/// [A-Za-z0-9_-] and at most 64 bytes.
class CharacterId {
public:
    explicit CharacterId(std::string value);

    const std::string& str() const noexcept { return value_; }
    auto operator<=>(const CharacterId&) const = default;

private:
    std::string value_;
};

struct TraitEntry {
    int epoch = 0;  // 0 is reserved for initialization content
    std::string content;
    std::string source_chapter_id;
    std::size_t token_count = 0;

    bool operator==(const TraitEntry&) const = default;
};

struct TraitSection {
    TraitKey key;
    TraitKind kind;
    std::vector<TraitEntry> entries;

    explicit TraitSection(TraitKey k) : key(k), kind(kind_of(k)) {}

    /// Type B append. Rejects anything that would break epoch ordering or
    /// repeat an (epoch, source_chapter_id) pair.
    void append(TraitEntry entry);
    /// Type A replacement: the section keeps only the latest generalized text.
    void replace(TraitEntry entry);

    void validate() const;
    bool operator==(const TraitSection&) const = default;
};

/// The five-trait initialization block. Keys outside kInitTraits cannot be
/// stored.
class InitPersona {
public:
    InitPersona() = default;

    void set(TraitKey key, std::string text);
    const std::string& at(TraitKey key) const;
    bool contains(TraitKey key) const { return texts_.count(key) != 0; }
    /// All five traits present with non-empty text.
    bool complete() const;
    const std::map<TraitKey, std::string>& texts() const noexcept { return texts_; }

    bool operator==(const InitPersona&) const = default;

private:
    std::map<TraitKey, std::string> texts_;
};

struct PersonaSnapshot {
    CharacterId character_id;
    int epoch = 0;
    std::optional<InitPersona> init_block;
    std::map<TraitKey, TraitSection> sections;
    std::string created_at;
    std::string provider_fingerprint;

    const TraitSection& section(TraitKey key) const { return sections.at(key); }
    TraitSection& section(TraitKey key) { return sections.at(key); }

    /// Checks every structural invariant; throws Error(validation) otherwise.
    void validate() const;
    bool operator==(const PersonaSnapshot&) const = default;
};

/// Epoch 0, all eight sections present and empty, no init block.
PersonaSnapshot empty_snapshot(const CharacterId& character_id);

/// Per-trait token totals: entry token_counts plus the init block text for the
/// five initialization traits. Feeds the trait-growth series across epochs.
std::map<TraitKey, std::size_t> section_token_totals(const PersonaSnapshot& snapshot,
                                                     const Tokenizer& tokenizer = default_tokenizer());

enum class PersonaBlock { init, train, tone };
std::string_view to_string(PersonaBlock block) noexcept;

/// Character range [start, end) of one rendered section inside the body.
/// `key` is empty for the tone block.
struct SectionSpan {
    PersonaBlock block;
    std::optional<TraitKey> key;
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const SectionSpan&) const = default;
};

struct AssembledPersona {
    CharacterId character_id;
    int epoch = 0;
    std::string body;
    std::optional<std::string> tone;
    std::vector<SectionSpan> section_offsets;

    bool operator==(const AssembledPersona&) const = default;
};

// JSON encoding. Field names follow the type definitions above.
nlohmann::ordered_json to_json(const TraitEntry& entry);
nlohmann::ordered_json to_json(const TraitSection& section);
nlohmann::ordered_json to_json(const InitPersona& init);
nlohmann::ordered_json to_json(const PersonaSnapshot& snapshot);
nlohmann::ordered_json to_json(const AssembledPersona& persona);

PersonaSnapshot snapshot_from_json(const nlohmann::json& doc);

}  // namespace charactergpt
