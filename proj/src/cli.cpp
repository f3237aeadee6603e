#include "charactergpt/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "charactergpt/eval/compare.hpp"
#include "charactergpt/eval/ratings.hpp"
#include "charactergpt/service.hpp"
#include "charactergpt/workspace.hpp"

namespace fs = std::filesystem;

namespace charactergpt {

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::validation:
        case ErrorKind::precondition:
        case ErrorKind::not_found:
        case ErrorKind::conflict: return 1;
        case ErrorKind::transport:
        case ErrorKind::protocol: return 2;
        case ErrorKind::internal: return 3;
    }
    return 3;
}

namespace {

struct GlobalOptions {
    std::string config;
    std::string store;
    std::string corpus_root;
    std::string prompts;
    std::string provider;
    std::string bfi_bank;
    bool fixed_clock = false;
    bool json = false;
};

class Cli {
public:
    Cli(std::istream& in, std::ostream& out, std::ostream& err) : in_(in), out_(out), err_(err) {}

    int run(int argc, const char* const* argv);

private:
    Workspace& workspace() {
        if (ws_) return *ws_;
        AppConfig cfg = g_.config.empty() ? AppConfig{} : AppConfig::load(g_.config);
        if (!g_.store.empty()) cfg.store_root = g_.store;
        if (!g_.corpus_root.empty()) cfg.corpus_root = g_.corpus_root;
        if (!g_.prompts.empty()) cfg.prompts_dir = g_.prompts;
        if (!g_.bfi_bank.empty()) cfg.bfi_bank = fs::path(g_.bfi_bank);
        if (!g_.provider.empty()) cfg.provider = ProviderSettings::parse(g_.provider);
        if (g_.fixed_clock) cfg.fixed_clock = true;
        ws_ = std::make_unique<Workspace>(std::move(cfg));
        return *ws_;
    }

    void emit(const nlohmann::ordered_json& j, const std::string& text) {
        if (g_.json) {
            out_ << j.dump(2) << '\n';
        } else {
            out_ << text;
        }
    }

    CharacterId require_head(const CharacterId& id) {
        if (!workspace().store().head(id)) {
            fail(ErrorKind::precondition,
                 "character '" + id.str() + "' has no snapshots yet; run `charactergpt init " + id.str() + "` first",
                 {{"character_id", id.str()}});
        }
        return id;
    }

    void corpus_validate(const std::string& dir);
    void stats(const CharacterId& id);
    void init(const CharacterId& id);
    int train(const CharacterId& id, std::optional<int> resume_from);
    void epochs(const CharacterId& id);
    void persona(const CharacterId& id, int epoch, const std::string& out_file);
    void chat(const CharacterId& id, int epoch);
    void bfi(const CharacterId& id, int epoch, int runs, const std::string& out_file);
    int compare(const std::string& human, const std::vector<std::string>& models, const std::string& expected);
    int stories(const CharacterId& id, int epoch, int n);
    void aggregate(const std::string& csv_path, const std::string& grouping);
    int serve();

    std::istream& in_;
    std::ostream& out_;
    std::ostream& err_;
    GlobalOptions g_;
    std::unique_ptr<Workspace> ws_;
};

void Cli::corpus_validate(const std::string& dir) {
    const auto corpus = load_corpus(dir);
    const auto st = compute_stats(corpus);
    nlohmann::ordered_json chapters = nlohmann::ordered_json::array();
    std::ostringstream text;
    text << corpus.character_id.str() << " (" << corpus.display_name << "): " << corpus.chapters.size()
         << " chapters, " << corpus.dialogue_lines.size() << " dialogue lines\n";
    for (const auto& ch : corpus.chapters) {
        const auto tokens = default_tokenizer().count(ch.body);
        chapters.push_back({{"index", ch.index}, {"id", ch.id()}, {"title", ch.title}, {"tokens", tokens}});
        text << "  " << ch.id() << "  " << ch.title << "  (" << tokens << " tokens)\n";
    }
    emit({{"character_id", corpus.character_id.str()},
          {"display_name", corpus.display_name},
          {"valid", true},
          {"chapters", std::move(chapters)},
          {"dialogue_lines", corpus.dialogue_lines.size()},
          {"stats", to_json(st)}},
         text.str());
}

void Cli::stats(const CharacterId& id) {
    const auto st = workspace().stats(id);
    std::ostringstream text;
    text << "chapters          " << st.chapter_count << '\n'
         << "novel tokens      " << st.novel_tokens << '\n'
         << "info tokens       " << st.info_tokens << '\n'
         << "refined info      " << st.refined_info_tokens << '\n'
         << "dialogue tokens   " << st.dialogue_tokens << '\n'
         << "trained tokens    " << st.trained_tokens << '\n';
    auto j = to_json(st);
    j["character_id"] = id.str();
    emit(j, text.str());
}

void Cli::init(const CharacterId& id) {
    auto& ws = workspace();
    const auto result = ws.initialize(id);
    std::ostringstream text;
    text << "initialized " << id.str() << " at epoch 0 (lineage " << ws.store().lineage() << ")\n";
    for (const auto& w : result.warnings) {
        text << "warning: " << w << '\n';
    }
    emit({{"character_id", id.str()},
          {"epoch", 0},
          {"lineage", ws.store().lineage()},
          {"created_at", result.snapshot.created_at},
          {"warnings", result.warnings}},
         text.str());
}

int Cli::train(const CharacterId& id, std::optional<int> resume_from) {
    auto& ws = workspace();
    const auto run = ws.train(id, resume_from, [this](const EpochResult& r) {
        if (g_.json) return;
        int counts[4] = {0, 0, 0, 0};
        for (const auto& o : r.outcomes) ++counts[static_cast<int>(o.status)];
        out_ << "epoch " << r.snapshot.epoch << ": " << counts[0] << " extracted, " << counts[1] << " generalized, "
             << counts[2] << " empty\n";
    });
    if (g_.json) out_ << to_json(run).dump(2) << '\n';
    if (run.failure) {
        err_ << "training stopped at epoch " << run.failure->epoch << ": " << run.failure->message << '\n';
        return exit_code(run.failure->kind);
    }
    if (!g_.json) {
        out_ << "trained " << id.str() << " through epoch " << run.end_epoch << " (" << run.completed_epochs.size()
             << " new snapshots)\n";
    }
    return 0;
}

void Cli::epochs(const CharacterId& id) {
    const auto list = workspace().epochs(id);
    auto arr = nlohmann::ordered_json::array();
    std::ostringstream text;
    for (const auto& e : list) {
        arr.push_back(to_json(e));
        text << e.epoch << '\t' << e.created_at << '\t' << (e.epoch == 0 ? "(initialization)" : e.chapter_title)
             << '\n';
    }
    emit({{"character_id", id.str()}, {"epochs", std::move(arr)}}, text.str());
}

void Cli::persona(const CharacterId& id, int epoch, const std::string& out_file) {
    const auto p = workspace().persona(require_head(id), epoch);
    if (!out_file.empty()) {
        std::ofstream f(out_file, std::ios::binary);
        if (!f) fail(ErrorKind::validation, "cannot write " + out_file);
        f << p.body;
        if (!g_.json) out_ << "wrote " << out_file << '\n';
    }
    if (g_.json) {
        out_ << to_json(p).dump(2) << '\n';
    } else if (out_file.empty()) {
        out_ << p.body;
    }
}

void Cli::chat(const CharacterId& id, int epoch) {
    auto& ws = workspace();
    auto session = ws.open_session(require_head(id), epoch, "cli-" + id.str() + "-e" + std::to_string(epoch));
    const auto options = ws.chat_options();
    if (!g_.json) err_ << "chatting with " << id.str() << " at epoch " << epoch << " (empty line or /quit ends)\n";
    for (std::string line; std::getline(in_, line);) {
        if (line.empty() || line == "/quit") break;
        const auto reply = session->respond(line, ws.provider(), options);
        if (g_.json) {
            out_ << nlohmann::ordered_json{{"user", line}, {"reply", reply}}.dump() << '\n';
        } else {
            out_ << reply << '\n';
        }
    }
}

void Cli::bfi(const CharacterId& id, int epoch, int runs, const std::string& out_file) {
    const auto table = workspace().bfi(require_head(id), epoch, runs);
    if (!out_file.empty()) {
        std::ofstream f(out_file, std::ios::binary);
        if (!f) fail(ErrorKind::validation, "cannot write " + out_file);
        f << table.to_json().dump(2) << '\n';
    }
    std::ostringstream text;
    text << "BFI facet scores for " << table.respondent << " (" << runs << " run" << (runs == 1 ? "" : "s") << ")\n";
    for (auto t : eval::kBigFive) {
        text << to_string(t) << '\n';
        for (auto f : eval::facets_of(t)) text << "  " << f << ": " << table.at(t, f) << '\n';
    }
    emit(table.to_json(), text.str());
}

int Cli::compare(const std::string& human, const std::vector<std::string>& models, const std::string& expected) {
    const auto human_table = eval::FacetScoreTable::load(human);
    std::vector<eval::NamedTable> tables;
    for (const auto& spec : models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
            fail(ErrorKind::validation, "--model expects name=file.json, got '" + spec + "'");
        }
        tables.emplace_back(spec.substr(0, eq), eval::FacetScoreTable::load(spec.substr(eq + 1)));
    }
    const auto report = eval::compare(human_table, tables);
    auto j = report.to_json();
    std::string text = eval::render_table(report);

    int code = 0;
    if (!expected.empty()) {
        const auto footer = eval::FooterFixture::load(expected);
        auto divs = nlohmann::ordered_json::array();
        std::ostringstream report_text;
        int unannotated = 0;
        for (const auto& d : eval::divergences(report, footer)) {
            divs.push_back(eval::to_json(d));
            report_text << (d.annotated ? "divergence (annotated): " : "DIVERGENCE: ") << to_string(d.trait) << ' '
                        << d.metric << ' ' << d.model << ": transcribed " << d.transcribed << ", recomputed "
                        << d.recomputed << (d.note.empty() ? "" : " - " + d.note) << '\n';
            if (!d.annotated) ++unannotated;
        }
        for (const auto& a : eval::stale_annotations(report, footer)) {
            report_text << "stale annotation: " << to_string(a.trait) << ' ' << a.metric << ' ' << a.model << '\n';
            ++unannotated;
        }
        if (divs.empty()) report_text << "footer rows match the expected values\n";
        j["divergences"] = std::move(divs);
        text += report_text.str();
        if (unannotated > 0) code = 1;
    }
    emit(j, text);
    return code;
}

int Cli::stories(const CharacterId& id, int epoch, int n) {
    const auto tasks = workspace().stories(require_head(id), epoch, n);
    auto arr = nlohmann::ordered_json::array();
    std::ostringstream text;
    int failed = 0;
    std::optional<ErrorKind> failure_kind;
    for (const auto& t : tasks) {
        nlohmann::ordered_json s{{"story_id", t.story_id}, {"word_count", t.word_count}, {"word_target", t.word_target}};
        if (t.error) {
            s["error"] = *t.error;
            ++failed;
            failure_kind = ErrorKind::transport;
            text << t.story_id << ": failed: " << *t.error << '\n';
        } else {
            text << t.story_id << ": " << t.word_count << " words (target " << t.word_target << ")\n";
        }
        arr.push_back(std::move(s));
    }
    emit({{"character_id", id.str()}, {"epoch", epoch}, {"stories", std::move(arr)}}, text.str());
    if (failed > 0) {
        err_ << failed << " of " << tasks.size() << " stories failed\n";
        return exit_code(*failure_kind);
    }
    return 0;
}

void Cli::aggregate(const std::string& csv_path, const std::string& grouping_name) {
    std::ifstream f(csv_path, std::ios::binary);
    if (!f) fail(ErrorKind::validation, "cannot read " + csv_path);
    std::stringstream buf;
    buf << f.rdbuf();
    const auto grouping = eval::parse_grouping(grouping_name);
    if (!grouping) fail(ErrorKind::validation, "unknown grouping '" + grouping_name + "'");
    const auto sheets = eval::parse_ratings_csv(buf.str());
    auto rows = eval::aggregate_ratings(sheets, *grouping);

    auto rows_json = nlohmann::ordered_json::array();
    for (const auto& r : rows) rows_json.push_back(eval::to_json(r));
    nlohmann::ordered_json j{{"grouping", grouping_name}, {"sheets", sheets.size()}, {"rows", std::move(rows_json)}};

    auto line = [](const eval::MeanRow& r) {
        std::string s = r.key;
        s.resize(std::max<std::size_t>(s.size() + 1, 24), ' ');
        for (auto m : eval::kMetrics) {
            std::string cell = r.formatted(m);
            cell.insert(0, 12 - std::min<std::size_t>(cell.size(), 12), ' ');
            s += cell;
        }
        return s + '\n';
    };
    std::string text(24, ' ');
    for (auto m : eval::kMetrics) {
        std::string h(to_string(m));
        h.insert(0, 12 - std::min<std::size_t>(h.size(), 12), ' ');
        text += h;
    }
    text += '\n';
    for (const auto& r : rows) text += line(r);
    if (*grouping == eval::Grouping::group && rows.size() > 1) {
        const auto avg = eval::cross_average(rows, "avg");
        j["average"] = eval::to_json(avg);
        text += line(avg);
    }
    emit(j, text);
}

int Cli::serve() {
    auto& ws = workspace();
    Service service(ws);
    err_ << "listening on " << ws.config().host << ':' << ws.config().port << '\n';
    if (!service.listen()) {
        fail(ErrorKind::validation, "cannot bind " + ws.config().host + ":" + std::to_string(ws.config().port));
    }
    return 0;
}

int Cli::run(int argc, const char* const* argv) {
    CLI::App app{"Build, train and evaluate character personas from narrative corpora", "charactergpt"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.add_option("--config", g_.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--store", g_.store, "Persona store root");
    app.add_option("--corpus-root", g_.corpus_root, "Directory holding <character>/ corpora");
    app.add_option("--prompts", g_.prompts, "Prompt template directory");
    app.add_option("--provider", g_.provider, "mock:<script.json> or openai:<model>");
    app.add_option("--bfi-bank", g_.bfi_bank, "BFI question bank JSON");
    app.add_flag("--fixed-clock", g_.fixed_clock, "Pin timestamps for reproducible artifacts");
    app.add_flag("--json", g_.json, "Machine-readable output");

    std::string dir, character, out_file, human, expected, csv_path, grouping = "group";
    std::vector<std::string> models;
    int epoch = 0, runs = 1, n = 4, resume_from = -1;

    auto* corpus_cmd = app.add_subcommand("corpus", "Corpus utilities");
    corpus_cmd->require_subcommand(1);
    auto* validate_cmd = corpus_cmd->add_subcommand("validate", "Check a corpus directory");
    validate_cmd->add_option("dir", dir)->required();

    auto* stats_cmd = app.add_subcommand("stats", "Token statistics for a character");
    stats_cmd->add_option("character", character)->required();
    auto* init_cmd = app.add_subcommand("init", "Build the epoch-0 persona");
    init_cmd->add_option("character", character)->required();
    auto* train_cmd = app.add_subcommand("train", "Train one epoch per chapter");
    train_cmd->add_option("character", character)->required();
    train_cmd->add_option("--resume-from", resume_from, "First epoch to train");
    auto* epochs_cmd = app.add_subcommand("epochs", "List stored epochs");
    epochs_cmd->add_option("character", character)->required();
    auto* persona_cmd = app.add_subcommand("persona", "Render the persona document at an epoch");
    persona_cmd->add_option("character", character)->required();
    persona_cmd->add_option("--epoch", epoch)->required();
    persona_cmd->add_option("--out", out_file, "Write the Markdown body here");
    auto* chat_cmd = app.add_subcommand("chat", "Talk to a character at an epoch (reads stdin)");
    chat_cmd->add_option("character", character)->required();
    chat_cmd->add_option("--epoch", epoch)->required();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluation tasks");
    eval_cmd->require_subcommand(1);
    auto* bfi_cmd = eval_cmd->add_subcommand("bfi", "Administer the BFI and score facets");
    bfi_cmd->add_option("character", character)->required();
    bfi_cmd->add_option("--epoch", epoch)->required();
    bfi_cmd->add_option("--runs", runs, "Administrations to average")->check(CLI::PositiveNumber);
    bfi_cmd->add_option("--out", out_file, "Write the facet table JSON here");
    auto* compare_cmd = eval_cmd->add_subcommand("compare", "Compare model facet tables with a human table");
    compare_cmd->add_option("--human", human)->required()->check(CLI::ExistingFile);
    compare_cmd->add_option("--model", models, "name=table.json (repeatable, column order)")->required();
    compare_cmd->add_option("--expected", expected, "Footer fixture to check against")->check(CLI::ExistingFile);
    auto* stories_cmd = eval_cmd->add_subcommand("stories", "Generate stories at an epoch");
    stories_cmd->add_option("character", character)->required();
    stories_cmd->add_option("--epoch", epoch)->required();
    stories_cmd->add_option("-n", n, "Number of stories")->check(CLI::NonNegativeNumber);
    auto* aggregate_cmd = eval_cmd->add_subcommand("aggregate", "Average a ratings CSV");
    aggregate_cmd->add_option("ratings", csv_path)->required();
    aggregate_cmd->add_option("--grouping", grouping, "group, story or all");

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out_, err_);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate_cmd->parsed()) {
            corpus_validate(dir);
        } else if (stats_cmd->parsed()) {
            stats(CharacterId(character));
        } else if (init_cmd->parsed()) {
            init(CharacterId(character));
        } else if (train_cmd->parsed()) {
            return train(CharacterId(character), resume_from >= 0 ? std::optional<int>(resume_from) : std::nullopt);
        } else if (epochs_cmd->parsed()) {
            epochs(CharacterId(character));
        } else if (persona_cmd->parsed()) {
            persona(CharacterId(character), epoch, out_file);
        } else if (chat_cmd->parsed()) {
            chat(CharacterId(character), epoch);
        } else if (bfi_cmd->parsed()) {
            bfi(CharacterId(character), epoch, runs, out_file);
        } else if (compare_cmd->parsed()) {
            return compare(human, models, expected);
        } else if (stories_cmd->parsed()) {
            return stories(CharacterId(character), epoch, n);
        } else if (aggregate_cmd->parsed()) {
            aggregate(csv_path, grouping);
        } else if (serve_cmd->parsed()) {
            return serve();
        }
        return 0;
    } catch (const Error& e) {
        err_ << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        if (g_.json) out_ << error_envelope(e).dump(2) << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err_ << "internal error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    return Cli(in, out, err).run(argc, argv);
}

}  // namespace charactergpt
