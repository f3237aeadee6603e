#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace charactergpt::eval {

enum class BigFive { OPN, CON, EXT, AGR, NEU };

inline constexpr std::array<BigFive, 5> kBigFive = {BigFive::OPN, BigFive::CON, BigFive::EXT, BigFive::AGR,
                                                    BigFive::NEU};

std::string_view to_string(BigFive trait) noexcept;
std::optional<BigFive> parse_big_five(std::string_view name) noexcept;

/// The six facet labels of a trait, in table order.
const std::array<std::string_view, 6>& facets_of(BigFive trait) noexcept;

inline constexpr int kItemsPerFacet = 4;
inline constexpr int kItemsPerTrait = 24;
inline constexpr int kBankSize = 120;

struct BfiItem {
    std::string id;
    std::string text;
    BigFive trait = BigFive::OPN;
    std::string facet;
    bool reverse_keyed = false;
};

class BfiQuestionBank {
public:
    explicit BfiQuestionBank(std::vector<BfiItem> items);

    /// JSON: {"items": [{id, text, trait, facet, reverse_keyed}]}.
    static BfiQuestionBank load(const std::filesystem::path& path);
    static BfiQuestionBank from_json(const nlohmann::json& doc);
    /// Structurally complete bank with placeholder wording: four items per
    /// facet, the second and fourth reverse-keyed.
    static BfiQuestionBank placeholder();

    const std::vector<BfiItem>& items() const noexcept { return items_; }
    const BfiItem& item(std::string_view id) const;
    nlohmann::ordered_json to_json() const;

private:
    void validate() const;
    std::vector<BfiItem> items_;
};

struct AnswerSheet {
    std::string respondent;
    std::map<std::string, int> answers;  // item id -> Likert 1..5

    bool complete_for(const BfiQuestionBank& bank) const;
};

/// Parses a Likert answer: a leading digit 1-5, an agreement phrase
/// ("strongly agree" -> 5, "neutral" -> 3, ...), or a lone digit 1-5 inside
/// the reply.
std::optional<int> parse_likert(std::string_view reply);

/// Instruction wrapper used when a model answers an item.
std::string bfi_item_prompt(const BfiItem& item);

/// Asks every item through `respond` (which receives the item text). An
/// unparseable answer is asked once more; items still unanswered after that
/// make the sheet incomplete and raise Error(validation) listing their ids.
AnswerSheet administer_bfi(const BfiQuestionBank& bank, std::string respondent,
                           const std::function<std::string(const BfiItem&)>& respond);

using FacetKey = std::pair<BigFive, std::string>;

struct FacetScoreTable {
    std::string respondent;
    std::map<FacetKey, int> scores;  // percentage 0..100

    int at(BigFive trait, std::string_view facet) const;

    static FacetScoreTable from_json(const nlohmann::json& doc);
    static FacetScoreTable load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;
};

/// Per item: (answer - 1), or (5 - answer) when reverse keyed. Per run, a
/// facet scores 100 * raw / (4 * items). Across runs the percentages are
/// averaged exactly, then rounded half up to an integer.
FacetScoreTable score_facets(const BfiQuestionBank& bank, std::span<const AnswerSheet> runs);

/// Mean of the given percentages rounded half up; the multi-run step of
/// score_facets exposed on its own.
int mean_percent(std::span<const double> percents);

}  // namespace charactergpt::eval
