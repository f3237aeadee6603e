#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace charactergpt {

/// The three prompt templates: extraction, generalization and inference.
/// Templates use named placeholders such as {character}; any other brace
/// text that is not a lowercase identifier is left alone.
struct PromptSet {
    std::string extraction;
    std::string generalization;
    std::string inference;

    /// SHA-256 over the three templates; identical text gives an identical hash.
    std::string version_hash() const;
    /// First 16 hex chars of version_hash(); names the store lineage directory.
    std::string lineage() const { return version_hash().substr(0, 16); }

    /// Non-empty templates that only reference placeholders they are allowed to.
    void validate() const;

    /// Reads extraction.txt, generalization.txt and inference.txt.
    static PromptSet load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    bool operator==(const PromptSet&) const = default;
};

inline const std::set<std::string, std::less<>> kExtractionPlaceholders = {
    "character", "trait_name", "trait_definition", "source", "chapter_body", "language"};
inline const std::set<std::string, std::less<>> kGeneralizationPlaceholders = {
    "character", "trait_name", "trait_definition", "prior_text", "extracted_text", "language"};
inline const std::set<std::string, std::less<>> kInferencePlaceholders = {"character", "persona", "language"};

/// Placeholder names referenced by a template, in order of first appearance.
std::set<std::string, std::less<>> placeholders_in(std::string_view tmpl);

/// Substitutes every placeholder; a placeholder without a value is an error.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

/// Directory holding the templates shipped with the project.
std::filesystem::path default_prompts_dir();

}  // namespace charactergpt
