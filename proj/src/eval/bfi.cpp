#include "charactergpt/eval/bfi.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "charactergpt/error.hpp"
#include "charactergpt/eval/rational.hpp"

namespace charactergpt::eval {

namespace {

constexpr std::array<std::array<std::string_view, 6>, 5> kFacets = {{
    {"Fantasy", "Aesthetics", "Feelings", "Actions", "Ideas", "Values liberalism"},
    {"Competence", "Order", "Dutifulness", "Achievement Striving", "Self-Discipline", "Deliberation"},
    {"Warmth", "Gregariousness", "Assertiveness", "Activity", "Excitement Seeking", "Positive Emotions"},
    {"Trust", "Compliance", "Altruism", "Straightforwardness", "Modesty", "Tendermindedness"},
    {"Anxiety", "Hostility", "Depression", "Self-Consciousness", "Impulsiveness", "Vulnerability"},
}};

bool is_facet_of(BigFive trait, std::string_view facet) {
    const auto& f = facets_of(trait);
    return std::find(f.begin(), f.end(), facet) != f.end();
}

BigFive require_trait(const std::string& name) {
    auto t = parse_big_five(name);
    if (!t) fail(ErrorKind::validation, "unknown Big Five trait '" + name + "'");
    return *t;
}

}  // namespace

std::string_view to_string(BigFive trait) noexcept {
    switch (trait) {
        case BigFive::OPN: return "OPN";
        case BigFive::CON: return "CON";
        case BigFive::EXT: return "EXT";
        case BigFive::AGR: return "AGR";
        case BigFive::NEU: return "NEU";
    }
    return "OPN";
}

std::optional<BigFive> parse_big_five(std::string_view name) noexcept {
    for (auto t : kBigFive) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

const std::array<std::string_view, 6>& facets_of(BigFive trait) noexcept {
    return kFacets[static_cast<std::size_t>(trait)];
}

BfiQuestionBank::BfiQuestionBank(std::vector<BfiItem> items) : items_(std::move(items)) { validate(); }

void BfiQuestionBank::validate() const {
    if (items_.size() != kBankSize) {
        fail(ErrorKind::validation, "BFI bank must hold " + std::to_string(kBankSize) + " items, got " +
                                        std::to_string(items_.size()));
    }
    std::set<std::string> ids;
    std::map<FacetKey, int> per_facet;
    std::map<BigFive, int> per_trait;
    for (const auto& item : items_) {
        if (item.id.empty() || !ids.insert(item.id).second) {
            fail(ErrorKind::validation, "BFI item ids must be unique and non-empty: '" + item.id + "'");
        }
        if (!is_facet_of(item.trait, item.facet)) {
            fail(ErrorKind::validation, "item " + item.id + ": '" + item.facet + "' is not a facet of " +
                                            std::string(to_string(item.trait)));
        }
        ++per_facet[{item.trait, item.facet}];
        ++per_trait[item.trait];
    }
    for (auto t : kBigFive) {
        if (per_trait[t] != kItemsPerTrait) {
            fail(ErrorKind::validation, std::string(to_string(t)) + " needs " + std::to_string(kItemsPerTrait) + " items");
        }
        for (auto f : facets_of(t)) {
            if (per_facet[{t, std::string(f)}] != kItemsPerFacet) {
                fail(ErrorKind::validation, std::string(to_string(t)) + "/" + std::string(f) + " needs " +
                                                std::to_string(kItemsPerFacet) + " items");
            }
        }
    }
}

BfiQuestionBank BfiQuestionBank::from_json(const nlohmann::json& doc) {
    std::vector<BfiItem> items;
    try {
        for (const auto& j : doc.at("items")) {
            items.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                             require_trait(j.at("trait").get<std::string>()), j.at("facet").get<std::string>(),
                             j.at("reverse_keyed").get<bool>()});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("malformed BFI bank: ") + e.what());
    }
    return BfiQuestionBank(std::move(items));
}

BfiQuestionBank BfiQuestionBank::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::validation, "cannot read BFI bank " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, path.string() + ": " + e.what());
    }
}

BfiQuestionBank BfiQuestionBank::placeholder() {
    std::vector<BfiItem> items;
    for (auto t : kBigFive) {
        for (auto f : facets_of(t)) {
            for (int k = 1; k <= kItemsPerFacet; ++k) {
                const bool reverse = k % 2 == 0;
                BfiItem item;
                item.id = std::string(to_string(t)) + "-" + std::to_string(items.size() % kItemsPerTrait + 1);
                item.text = "[placeholder " + std::string(to_string(t)) + "/" + std::string(f) + " #" +
                            std::to_string(k) + (reverse ? ", reverse-keyed" : "") +
                            "] I am someone who shows " + (reverse ? "little " : "a lot of ") +
                            std::string(f) + ".";
                item.trait = t;
                item.facet = std::string(f);
                item.reverse_keyed = reverse;
                items.push_back(std::move(item));
            }
        }
    }
    return BfiQuestionBank(std::move(items));
}

const BfiItem& BfiQuestionBank::item(std::string_view id) const {
    for (const auto& i : items_) {
        if (i.id == id) return i;
    }
    fail(ErrorKind::not_found, "no BFI item " + std::string(id));
}

nlohmann::ordered_json BfiQuestionBank::to_json() const {
    auto items = nlohmann::ordered_json::array();
    for (const auto& i : items_) {
        items.push_back({{"id", i.id},
                         {"text", i.text},
                         {"trait", to_string(i.trait)},
                         {"facet", i.facet},
                         {"reverse_keyed", i.reverse_keyed}});
    }
    return {{"items", std::move(items)}};
}

bool AnswerSheet::complete_for(const BfiQuestionBank& bank) const {
    return std::all_of(bank.items().begin(), bank.items().end(), [this](const BfiItem& i) {
        auto it = answers.find(i.id);
        return it != answers.end() && it->second >= 1 && it->second <= 5;
    });
}

std::optional<int> parse_likert(std::string_view reply) {
    std::string text;
    for (unsigned char c : reply) text.push_back(static_cast<char>(std::tolower(c)));
    const auto b = text.find_first_not_of(" \t\r\n\"'*(");
    if (b == std::string::npos) return std::nullopt;
    text.erase(0, b);
    if (text[0] >= '1' && text[0] <= '5' && (text.size() == 1 || !std::isdigit(static_cast<unsigned char>(text[1])))) {
        return text[0] - '0';
    }
    static constexpr std::array<std::pair<std::string_view, int>, 6> kPhrases = {{
        {"strongly disagree", 1},
        {"strongly agree", 5},
        {"neither agree nor disagree", 3},
        {"neutral", 3},
        {"disagree", 2},
        {"agree", 4},
    }};
    for (const auto& [phrase, value] : kPhrases) {
        if (text.find(phrase) != std::string::npos) return value;
    }
    std::optional<int> lone;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const bool digit = std::isdigit(static_cast<unsigned char>(text[i])) != 0;
        if (!digit) continue;
        const bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
        const bool right_ok = i + 1 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
        if (left_ok && right_ok && text[i] >= '1' && text[i] <= '5') {
            if (lone && *lone != text[i] - '0') return std::nullopt;
            lone = text[i] - '0';
        }
    }
    return lone;
}

std::string bfi_item_prompt(const BfiItem& item) {
    return "Statement: \"" + item.text +
           "\"\nHow accurately does this statement describe you? Reply with a single number from 1 to 5 "
           "(1 = strongly disagree, 2 = disagree, 3 = neutral, 4 = agree, 5 = strongly agree).";
}

AnswerSheet administer_bfi(const BfiQuestionBank& bank, std::string respondent,
                           const std::function<std::string(const BfiItem&)>& respond) {
    AnswerSheet sheet{std::move(respondent), {}};
    std::vector<std::string> missing;
    for (const auto& item : bank.items()) {
        auto answer = parse_likert(respond(item));
        if (!answer) answer = parse_likert(respond(item));
        if (answer) {
            sheet.answers[item.id] = *answer;
        } else {
            missing.push_back(item.id);
        }
    }
    if (!missing.empty()) {
        fail(ErrorKind::validation,
             "answer sheet for " + sheet.respondent + " is incomplete: " + std::to_string(missing.size()) +
                 " item(s) unanswered",
             {{"missing_items", missing}});
    }
    return sheet;
}

int FacetScoreTable::at(BigFive trait, std::string_view facet) const {
    auto it = scores.find({trait, std::string(facet)});
    if (it == scores.end()) {
        fail(ErrorKind::not_found, "no score for " + std::string(to_string(trait)) + "/" + std::string(facet));
    }
    return it->second;
}

FacetScoreTable FacetScoreTable::from_json(const nlohmann::json& doc) {
    FacetScoreTable table;
    try {
        table.respondent = doc.value("respondent", "");
        for (const auto& [trait_name, facets] : doc.at("scores").items()) {
            const BigFive t = require_trait(trait_name);
            for (const auto& [facet, score] : facets.items()) {
                if (!is_facet_of(t, facet)) {
                    fail(ErrorKind::validation, "'" + facet + "' is not a facet of " + trait_name);
                }
                const int v = score.get<int>();
                if (v < 0 || v > 100) fail(ErrorKind::validation, "facet score out of [0, 100]: " + facet);
                table.scores[{t, facet}] = v;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("malformed facet table: ") + e.what());
    }
    return table;
}

FacetScoreTable FacetScoreTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::validation, "cannot read facet table " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, path.string() + ": " + e.what());
    }
}

nlohmann::ordered_json FacetScoreTable::to_json() const {
    nlohmann::ordered_json scores_json = nlohmann::ordered_json::object();
    for (auto t : kBigFive) {
        nlohmann::ordered_json facets = nlohmann::ordered_json::object();
        for (auto f : facets_of(t)) {
            auto it = scores.find({t, std::string(f)});
            if (it != scores.end()) facets[std::string(f)] = it->second;
        }
        if (!facets.empty()) scores_json[std::string(to_string(t))] = std::move(facets);
    }
    return {{"respondent", respondent}, {"scores", std::move(scores_json)}};
}

FacetScoreTable score_facets(const BfiQuestionBank& bank, std::span<const AnswerSheet> runs) {
    if (runs.empty()) fail(ErrorKind::precondition, "at least one answer sheet is required");
    for (const auto& sheet : runs) {
        if (!sheet.complete_for(bank)) {
            fail(ErrorKind::validation, "answer sheet for " + sheet.respondent + " is incomplete");
        }
    }
    std::map<FacetKey, std::vector<const BfiItem*>> by_facet;
    for (const auto& item : bank.items()) by_facet[{item.trait, item.facet}].push_back(&item);

    FacetScoreTable table{runs.front().respondent, {}};
    for (const auto& [key, items] : by_facet) {
        const std::int64_t max_points = 4 * static_cast<std::int64_t>(items.size());
        Rational total;
        for (const auto& sheet : runs) {
            std::int64_t raw = 0;
            for (const BfiItem* item : items) {
                const int a = sheet.answers.at(item->id);
                raw += item->reverse_keyed ? 5 - a : a - 1;
            }
            total = total + Rational::of(100 * raw, max_points);
        }
        table.scores[key] = static_cast<int>(round_half_up_scaled(total / static_cast<std::int64_t>(runs.size()), 0));
    }
    return table;
}

int mean_percent(std::span<const double> percents) {
    if (percents.empty()) fail(ErrorKind::precondition, "mean of no percentages");
    // Percentages carry at most two decimals (multiples of 1/16 of 100).
    Rational total;
    for (double p : percents) total = total + Rational::of(std::llround(p * 10000.0), 10000);
    return static_cast<int>(round_half_up_scaled(total / static_cast<std::int64_t>(percents.size()), 0));
}

}  // namespace charactergpt::eval
