#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charactergpt/eval/rational.hpp"

namespace charactergpt::eval {

enum class Metric { grammar, coherence, likability, relevance, complexity, creativity };

inline constexpr std::array<Metric, 6> kMetrics = {Metric::grammar,   Metric::coherence,  Metric::likability,
                                                   Metric::relevance, Metric::complexity, Metric::creativity};

/// Column label, e.g. "Grammar".
std::string_view to_string(Metric m) noexcept;

struct RatingSheet {
    std::string rater_id;
    std::string story_id;
    std::string group;  // usually the character; see parse_ratings_csv
    std::array<int, 6> scores{};  // indexed like kMetrics, each in [1, 5]
    bool informed_ai_generated = true;
};

/// CSV with a header row naming rater_id, story_id and the six metric columns
/// (any order, case-insensitive). Optional columns: group and
/// informed_ai_generated. Without a group column the group is the character
/// part of a "<character>-e<epoch>-s<k>" story id, or the whole id.
std::vector<RatingSheet> parse_ratings_csv(std::string_view csv);

enum class Grouping { story, group, all };
std::optional<Grouping> parse_grouping(std::string_view name) noexcept;

struct MeanRow {
    std::string key;
    std::size_t sheets = 0;
    std::array<Rational, 6> means{};

    /// Mean rendered to two decimals, half up.
    std::string formatted(Metric m) const;
};

/// Exact per-metric means for each group, in first-seen order.
std::vector<MeanRow> aggregate_ratings(std::span<const RatingSheet> sheets, Grouping grouping);

/// Unweighted mean of the rows' means, each first rounded half up to two
/// decimals the way the per-group rows are reported.
MeanRow cross_average(std::span<const MeanRow> rows, std::string key);

nlohmann::ordered_json to_json(const MeanRow& row);

}  // namespace charactergpt::eval
