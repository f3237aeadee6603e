#include "charactergpt/eval/compare.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "charactergpt/error.hpp"

namespace charactergpt::eval {

const TraitComparison& ComparisonReport::trait(BigFive t) const {
    for (const auto& tc : traits) {
        if (tc.trait == t) return tc;
    }
    fail(ErrorKind::not_found, "no comparison for " + std::string(to_string(t)));
}

nlohmann::ordered_json ComparisonReport::to_json() const {
    nlohmann::ordered_json out;
    out["models"] = models;
    auto traits_json = nlohmann::ordered_json::array();
    for (const auto& tc : traits) {
        auto facets = nlohmann::ordered_json::array();
        for (std::size_t f = 0; f < tc.facets.size(); ++f) {
            nlohmann::ordered_json row;
            row["facet"] = tc.facets[f];
            row["human"] = tc.human[f];
            nlohmann::ordered_json per_model = nlohmann::ordered_json::object();
            for (std::size_t m = 0; m < models.size(); ++m) {
                per_model[models[m]] = {{"score", tc.scores[m][f]}, {"gap", tc.gaps[m][f]}};
            }
            row["models"] = std::move(per_model);
            facets.push_back(std::move(row));
        }
        nlohmann::ordered_json wins = nlohmann::ordered_json::object();
        nlohmann::ordered_json sum_abs = nlohmann::ordered_json::object();
        for (std::size_t m = 0; m < models.size(); ++m) {
            wins[models[m]] = tc.wins[m];
            sum_abs[models[m]] = tc.sum_abs[m];
        }
        traits_json.push_back({{"trait", to_string(tc.trait)},
                               {"facets", std::move(facets)},
                               {"wins", std::move(wins)},
                               {"sum_abs", std::move(sum_abs)}});
    }
    out["traits"] = std::move(traits_json);
    return out;
}

ComparisonReport compare(const FacetScoreTable& human, const std::vector<NamedTable>& models) {
    if (models.empty()) fail(ErrorKind::precondition, "compare needs at least one model table");
    ComparisonReport report;
    for (const auto& [name, _] : models) {
        if (std::find(report.models.begin(), report.models.end(), name) != report.models.end()) {
            fail(ErrorKind::validation, "duplicate model name '" + name + "'");
        }
        report.models.push_back(name);
    }

    for (auto t : kBigFive) {
        TraitComparison tc;
        tc.trait = t;
        for (auto f : facets_of(t)) {
            if (human.scores.count({t, std::string(f)})) tc.facets.emplace_back(f);
        }
        if (tc.facets.empty()) continue;

        const std::size_t nm = models.size();
        tc.scores.assign(nm, {});
        tc.gaps.assign(nm, {});
        tc.wins.assign(nm, 0);
        tc.sum_abs.assign(nm, 0);
        for (const auto& facet : tc.facets) {
            const int h = human.at(t, facet);
            tc.human.push_back(h);
            int best = -1;
            for (std::size_t m = 0; m < nm; ++m) {
                const int s = models[m].second.at(t, facet);
                const int d = s - h;
                tc.scores[m].push_back(s);
                tc.gaps[m].push_back(d);
                tc.sum_abs[m] += std::abs(d);
                if (best < 0 || std::abs(d) < best) best = std::abs(d);
            }
            for (std::size_t m = 0; m < nm; ++m) {
                if (std::abs(tc.gaps[m].back()) == best) ++tc.wins[m];
            }
        }
        report.traits.push_back(std::move(tc));
    }
    if (report.traits.empty()) fail(ErrorKind::validation, "human table has no facet scores");
    return report;
}

namespace {

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
}

std::string signed_str(int v) { return (v > 0 ? "+" : "") + std::to_string(v); }

}  // namespace

std::string render_table(const ComparisonReport& report) {
    std::size_t col = 10;
    for (const auto& m : report.models) col = std::max(col, m.size() + 2);
    constexpr std::size_t kLabel = 22;

    std::ostringstream out;
    for (const auto& tc : report.traits) {
        std::string header = std::string(to_string(tc.trait));
        header.resize(kLabel, ' ');
        for (const auto& m : report.models) header += pad(m, col);
        header += pad("Human", col);
        out << header << '\n';
        for (std::size_t f = 0; f < tc.facets.size(); ++f) {
            std::string line = tc.facets[f];
            line.resize(kLabel, ' ');
            for (std::size_t m = 0; m < report.models.size(); ++m) {
                line += pad(std::to_string(tc.scores[m][f]) + " (" + signed_str(tc.gaps[m][f]) + ")", col);
            }
            line += pad(std::to_string(tc.human[f]), col);
            out << line << '\n';
        }
        std::string wins = "# Wins";
        std::string sums = "Sum |d|";
        wins.resize(kLabel, ' ');
        sums.resize(kLabel, ' ');
        for (std::size_t m = 0; m < report.models.size(); ++m) {
            wins += pad(std::to_string(tc.wins[m]), col);
            sums += pad(std::to_string(tc.sum_abs[m]), col);
        }
        out << wins << '\n' << sums << "\n\n";
    }
    return out.str();
}

FooterFixture FooterFixture::from_json(const nlohmann::json& doc) {
    FooterFixture fx;
    try {
        fx.models = doc.at("models").get<std::vector<std::string>>();
        for (const auto& [trait_name, row] : doc.at("rows").items()) {
            auto t = parse_big_five(trait_name);
            if (!t) fail(ErrorKind::validation, "unknown trait '" + trait_name + "' in footer fixture");
            Row r{row.at("wins").get<std::vector<int>>(), row.at("sum_abs").get<std::vector<int>>()};
            if (r.wins.size() != fx.models.size() || r.sum_abs.size() != fx.models.size()) {
                fail(ErrorKind::validation, "footer row " + trait_name + " has the wrong number of columns");
            }
            fx.rows[*t] = std::move(r);
        }
        for (const auto& a : doc.value("annotations", nlohmann::json::array())) {
            auto t = parse_big_five(a.at("trait").get<std::string>());
            if (!t) fail(ErrorKind::validation, "unknown trait in annotation");
            fx.annotations.push_back(
                {*t, a.at("metric").get<std::string>(), a.at("model").get<std::string>(), a.value("note", "")});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("malformed footer fixture: ") + e.what());
    }
    return fx;
}

FooterFixture FooterFixture::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::validation, "cannot read footer fixture " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, path.string() + ": " + e.what());
    }
}

namespace {

const FooterFixture::Annotation* find_annotation(const FooterFixture& footer, BigFive t, std::string_view metric,
                                                 std::string_view model) {
    for (const auto& a : footer.annotations) {
        if (a.trait == t && a.metric == metric && a.model == model) return &a;
    }
    return nullptr;
}

}  // namespace

std::vector<Divergence> divergences(const ComparisonReport& report, const FooterFixture& footer) {
    std::vector<Divergence> out;
    for (const auto& [t, row] : footer.rows) {
        const auto& tc = report.trait(t);
        for (std::size_t fm = 0; fm < footer.models.size(); ++fm) {
            auto it = std::find(report.models.begin(), report.models.end(), footer.models[fm]);
            if (it == report.models.end()) {
                fail(ErrorKind::validation, "footer model '" + footer.models[fm] + "' is not in the report");
            }
            const auto m = static_cast<std::size_t>(it - report.models.begin());
            const std::pair<std::string_view, std::pair<int, int>> cells[] = {
                {"wins", {row.wins[fm], tc.wins[m]}},
                {"sum_abs", {row.sum_abs[fm], tc.sum_abs[m]}},
            };
            for (const auto& [metric, values] : cells) {
                if (values.first == values.second) continue;
                const auto* note = find_annotation(footer, t, metric, footer.models[fm]);
                out.push_back({t, std::string(metric), footer.models[fm], values.first, values.second,
                               note != nullptr, note ? note->note : std::string()});
            }
        }
    }
    return out;
}

std::vector<FooterFixture::Annotation> stale_annotations(const ComparisonReport& report,
                                                         const FooterFixture& footer) {
    const auto found = divergences(report, footer);
    std::vector<FooterFixture::Annotation> stale;
    for (const auto& a : footer.annotations) {
        const bool live = std::any_of(found.begin(), found.end(), [&](const Divergence& d) {
            return d.trait == a.trait && d.metric == a.metric && d.model == a.model;
        });
        if (!live) stale.push_back(a);
    }
    return stale;
}

nlohmann::ordered_json to_json(const Divergence& d) {
    return {{"trait", to_string(d.trait)}, {"metric", d.metric},     {"model", d.model},
            {"transcribed", d.transcribed}, {"recomputed", d.recomputed}, {"annotated", d.annotated},
            {"note", d.note}};
}

}  // namespace charactergpt::eval
