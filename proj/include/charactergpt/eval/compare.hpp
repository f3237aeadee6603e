#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "charactergpt/eval/bfi.hpp"

namespace charactergpt::eval {

struct TraitComparison {
    BigFive trait = BigFive::OPN;
    std::vector<std::string> facets;
    std::vector<int> human;                    // per facet
    std::vector<std::vector<int>> scores;      // [model][facet]
    std::vector<std::vector<int>> gaps;        // [model][facet], model - human
    std::vector<int> wins;                     // per model
    std::vector<int> sum_abs;                  // per model
};

struct ComparisonReport {
    std::vector<std::string> models;
    std::vector<TraitComparison> traits;

    const TraitComparison& trait(BigFive t) const;
    nlohmann::ordered_json to_json() const;
};

using NamedTable = std::pair<std::string, FacetScoreTable>;

/// Gap d = model - human per facet. # Wins counts the facets where a model's
/// |d| equals the minimum over models (ties credit every minimizer); Σ|d| is
/// the per-trait sum of |d|.
ComparisonReport compare(const FacetScoreTable& human, const std::vector<NamedTable>& models);

/// Plain-text table: facet rows, one column per model with the gap in
/// parentheses, a human column, then # Wins and Σ|d| footer rows per trait.
std::string render_table(const ComparisonReport& report);

/// Transcribed footer rows for one comparison, plus annotations for rows
/// known to disagree with recomputation.
struct FooterFixture {
    struct Row {
        std::vector<int> wins;
        std::vector<int> sum_abs;
    };
    struct Annotation {
        BigFive trait;
        std::string metric;  // "wins" or "sum_abs"
        std::string model;
        std::string note;
    };

    std::vector<std::string> models;
    std::map<BigFive, Row> rows;
    std::vector<Annotation> annotations;

    /// {"models": [...], "rows": {"OPN": {"wins": [...], "sum_abs": [...]}},
    ///  "annotations": [{"trait", "metric", "model", "note"}]}
    static FooterFixture from_json(const nlohmann::json& doc);
    static FooterFixture load(const std::filesystem::path& path);
};

struct Divergence {
    BigFive trait;
    std::string metric;
    std::string model;
    int transcribed = 0;
    int recomputed = 0;
    bool annotated = false;
    std::string note;
};

/// Every footer cell where recomputation disagrees with the transcription.
std::vector<Divergence> divergences(const ComparisonReport& report, const FooterFixture& footer);

/// Annotations in the fixture that no longer match an actual divergence.
std::vector<FooterFixture::Annotation> stale_annotations(const ComparisonReport& report, const FooterFixture& footer);

nlohmann::ordered_json to_json(const Divergence& d);

}  // namespace charactergpt::eval
