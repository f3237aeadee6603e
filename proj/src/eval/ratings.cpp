#include "charactergpt/eval/ratings.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>

#include "charactergpt/error.hpp"

namespace charactergpt::eval {

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::grammar: return "Grammar";
        case Metric::coherence: return "Coherence";
        case Metric::likability: return "Likability";
        case Metric::relevance: return "Relevance";
        case Metric::complexity: return "Complexity";
        case Metric::creativity: return "Creativity";
    }
    return "Grammar";
}

namespace {

std::string lower(std::string_view s) {
    std::string out;
    for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// RFC 4180 subset: quoted fields with "" escapes, no embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) fail(ErrorKind::validation, "unterminated quote on line " + std::to_string(line_no));
    fields.push_back(trim(cur));
    return fields;
}

std::string default_group(const std::string& story_id) {
    static const std::regex kStoryId(R"(^(.+)-e\d+-s\d+$)");
    std::smatch m;
    if (std::regex_match(story_id, m, kStoryId)) return m[1].str();
    return story_id;
}

bool parse_flag(const std::string& v, std::size_t line_no) {
    const auto l = lower(v);
    if (l == "true" || l == "1" || l == "yes" || l.empty()) return true;
    if (l == "false" || l == "0" || l == "no") return false;
    fail(ErrorKind::validation, "line " + std::to_string(line_no) + ": bad informed_ai_generated value '" + v + "'");
}

}  // namespace

std::vector<RatingSheet> parse_ratings_csv(std::string_view csv) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        auto nl = csv.find('\n', pos);
        if (nl == std::string_view::npos) nl = csv.size();
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }

    std::size_t i = 0;
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i == lines.size()) fail(ErrorKind::validation, "ratings CSV is empty");

    const auto header = split_csv_line(lines[i], i + 1);
    std::map<std::string, std::size_t> column;
    for (std::size_t c = 0; c < header.size(); ++c) column[lower(header[c])] = c;

    auto require = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) {
            fail(ErrorKind::validation, "ratings CSV is missing the '" + name + "' column",
                 {{"missing_column", name}});
        }
        return it->second;
    };
    const std::size_t rater_col = require("rater_id");
    const std::size_t story_col = require("story_id");
    std::array<std::size_t, 6> metric_col{};
    for (std::size_t m = 0; m < kMetrics.size(); ++m) metric_col[m] = require(lower(to_string(kMetrics[m])));
    const auto group_it = column.find("group");
    const auto informed_it = column.find("informed_ai_generated");

    std::vector<RatingSheet> sheets;
    for (++i; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const std::size_t line_no = i + 1;
        const auto fields = split_csv_line(lines[i], line_no);
        auto field = [&](std::size_t c) -> const std::string& {
            if (c >= fields.size()) {
                fail(ErrorKind::validation, "line " + std::to_string(line_no) + " has too few columns");
            }
            return fields[c];
        };
        RatingSheet sheet;
        sheet.rater_id = field(rater_col);
        sheet.story_id = field(story_col);
        if (sheet.rater_id.empty() || sheet.story_id.empty()) {
            fail(ErrorKind::validation, "line " + std::to_string(line_no) + ": rater_id and story_id are required");
        }
        for (std::size_t m = 0; m < kMetrics.size(); ++m) {
            const auto& v = field(metric_col[m]);
            const std::string metric(to_string(kMetrics[m]));
            if (v.empty()) {
                fail(ErrorKind::validation, "line " + std::to_string(line_no) + ": missing " + metric + " score",
                     {{"line", line_no}, {"metric", metric}});
            }
            if (v.size() != 1 || v[0] < '1' || v[0] > '5') {
                fail(ErrorKind::validation,
                     "line " + std::to_string(line_no) + ": " + metric + " score must be an integer 1-5, got '" + v +
                         "'",
                     {{"line", line_no}, {"metric", metric}});
            }
            sheet.scores[m] = v[0] - '0';
        }
        sheet.group = group_it != column.end() && !field(group_it->second).empty() ? field(group_it->second)
                                                                                   : default_group(sheet.story_id);
        if (informed_it != column.end()) sheet.informed_ai_generated = parse_flag(field(informed_it->second), line_no);
        sheets.push_back(std::move(sheet));
    }
    return sheets;
}

std::optional<Grouping> parse_grouping(std::string_view name) noexcept {
    if (name == "story") return Grouping::story;
    if (name == "group") return Grouping::group;
    if (name == "all") return Grouping::all;
    return std::nullopt;
}

std::string MeanRow::formatted(Metric m) const { return format_fixed(means[static_cast<std::size_t>(m)], 2); }

std::vector<MeanRow> aggregate_ratings(std::span<const RatingSheet> sheets, Grouping grouping) {
    if (sheets.empty()) fail(ErrorKind::precondition, "no rating sheets to aggregate");
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::size_t, std::array<std::int64_t, 6>>> sums;
    for (const auto& s : sheets) {
        for (int v : s.scores) {
            if (v < 1 || v > 5) fail(ErrorKind::validation, "rating outside [1, 5] for story " + s.story_id);
        }
        const std::string key = grouping == Grouping::story ? s.story_id
                                : grouping == Grouping::group ? s.group
                                                              : std::string("all");
        auto [it, inserted] = sums.try_emplace(key);
        if (inserted) order.push_back(key);
        ++it->second.first;
        for (std::size_t m = 0; m < 6; ++m) it->second.second[m] += s.scores[m];
    }
    std::vector<MeanRow> rows;
    for (const auto& key : order) {
        const auto& [n, total] = sums.at(key);
        MeanRow row{key, n, {}};
        for (std::size_t m = 0; m < 6; ++m) row.means[m] = Rational::of(total[m], static_cast<std::int64_t>(n));
        rows.push_back(std::move(row));
    }
    return rows;
}

MeanRow cross_average(std::span<const MeanRow> rows, std::string key) {
    if (rows.empty()) fail(ErrorKind::precondition, "no rows to average");
    MeanRow out{std::move(key), 0, {}};
    for (std::size_t m = 0; m < 6; ++m) {
        Rational total;
        for (const auto& r : rows) total = total + Rational::of(round_half_up_scaled(r.means[m], 2), 100);
        out.means[m] = total / static_cast<std::int64_t>(rows.size());
    }
    for (const auto& r : rows) out.sheets += r.sheets;
    return out;
}

nlohmann::ordered_json to_json(const MeanRow& row) {
    nlohmann::ordered_json means = nlohmann::ordered_json::object();
    for (auto m : kMetrics) means[std::string(to_string(m))] = row.formatted(m);
    return {{"key", row.key}, {"sheets", row.sheets}, {"means", std::move(means)}};
}

}  // namespace charactergpt::eval
