#include "charactergpt/workspace.hpp"

#include <fstream>

#include "charactergpt/error.hpp"

namespace fs = std::filesystem;

namespace charactergpt {

ProviderSettings ProviderSettings::parse(std::string_view spec) {
    ProviderSettings s;
    const auto colon = spec.find(':');
    const std::string kind(spec.substr(0, colon));
    const std::string arg = colon == std::string_view::npos ? std::string() : std::string(spec.substr(colon + 1));
    if (kind == "mock") {
        s.kind = "mock";
        s.model = "mock";
        s.script = arg;
    } else if (kind == "openai") {
        if (!arg.empty()) s.model = arg;
    } else {
        fail(ErrorKind::validation, "unknown provider '" + kind + "' (expected mock:<script.json> or openai:<model>)");
    }
    return s;
}

std::unique_ptr<Provider> make_provider(const ProviderSettings& settings) {
    if (settings.kind == "mock") {
        if (settings.script.empty()) return std::make_unique<MockProvider>();
        return MockProvider::from_file(settings.script);
    }
    if (settings.kind != "openai") fail(ErrorKind::validation, "unknown provider kind '" + settings.kind + "'");
    ProviderConfig cfg;
    cfg.endpoint = settings.endpoint;
    cfg.model = settings.model;
    cfg.api_key_env = settings.api_key_env;
    cfg.retry.max_attempts = settings.max_attempts;
    cfg.retry.initial_backoff = std::chrono::milliseconds(settings.backoff_ms);
    cfg.timeout = std::chrono::milliseconds(settings.timeout_ms);
    cfg.max_concurrent = settings.max_concurrent;
    return std::make_unique<OpenAiProvider>(std::move(cfg));
}

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p : (base / p).lexically_normal();
}

CallParams call_params(const nlohmann::json& j, CallParams fallback) {
    fallback.temperature = j.value("temperature", fallback.temperature);
    fallback.max_tokens = j.value("max_tokens", fallback.max_tokens);
    return fallback;
}

}  // namespace

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::validation, "cannot read config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, path.string() + ": " + e.what());
    }
    return from_json(doc, fs::absolute(path).parent_path());
}

AppConfig AppConfig::from_json(const nlohmann::json& doc, const fs::path& base_dir) {
    AppConfig c;
    try {
        if (doc.contains("store_root")) c.store_root = resolve(base_dir, doc["store_root"].get<std::string>());
        if (doc.contains("corpus_root")) c.corpus_root = resolve(base_dir, doc["corpus_root"].get<std::string>());
        if (doc.contains("prompts_dir")) c.prompts_dir = resolve(base_dir, doc["prompts_dir"].get<std::string>());
        if (doc.contains("bfi_bank")) c.bfi_bank = resolve(base_dir, doc["bfi_bank"].get<std::string>());
        if (doc.contains("provider")) {
            const auto& p = doc["provider"];
            auto& s = c.provider;
            s.kind = p.value("kind", s.kind);
            if (s.kind == "mock") s.model = "mock";
            s.endpoint = p.value("endpoint", s.endpoint);
            s.model = p.value("model", s.model);
            s.api_key_env = p.value("api_key_env", s.api_key_env);
            s.max_attempts = p.value("max_attempts", s.max_attempts);
            s.backoff_ms = p.value("backoff_ms", s.backoff_ms);
            s.timeout_ms = p.value("timeout_ms", s.timeout_ms);
            s.max_concurrent = p.value("max_concurrent", s.max_concurrent);
            if (p.contains("script")) s.script = resolve(base_dir, p["script"].get<std::string>());
            if (p.contains("api_key")) {
                fail(ErrorKind::validation, "config must not contain an API key; set api_key_env instead");
            }
        }
        c.fixed_clock = doc.value("fixed_clock", c.fixed_clock);
        c.parallel = doc.value("parallel", c.parallel);
        c.tone_k = doc.value("tone_k", c.tone_k);
        c.context_budget_tokens = doc.value("context_budget_tokens", c.context_budget_tokens);
        if (doc.contains("extraction")) c.extraction = call_params(doc["extraction"], c.extraction);
        if (doc.contains("generalization")) c.generalization = call_params(doc["generalization"], c.generalization);
        if (doc.contains("chat")) c.chat = call_params(doc["chat"], c.chat);
        c.host = doc.value("host", c.host);
        c.port = doc.value("port", c.port);
        c.cors_allowlist = doc.value("cors_allowlist", c.cors_allowlist);
        c.body_limit = doc.value("body_limit", c.body_limit);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("bad config value: ") + e.what());
    }
    return c;
}

Workspace::Workspace(AppConfig config, std::unique_ptr<Provider> provider)
    : config_(std::move(config)),
      clock_(config_.fixed_clock ? fixed_clock() : system_clock()),
      prompts_(PromptSet::load(config_.prompts_dir)),
      provider_(provider ? std::move(provider) : make_provider(config_.provider)),
      bank_(config_.bfi_bank ? eval::BfiQuestionBank::load(*config_.bfi_bank)
                             : eval::BfiQuestionBank::placeholder()) {
    prompts_.validate();
    std::error_code ec;
    fs::create_directories(config_.store_root, ec);
    if (ec || !fs::is_directory(config_.store_root)) {
        fail(ErrorKind::validation, "store root " + config_.store_root.string() + " is not a writable directory");
    }
    store_ = std::make_unique<PersonaStore>(config_.store_root, prompts_.lineage(), clock_);
}

CptOptions Workspace::cpt_options() const {
    CptOptions o;
    o.extraction = config_.extraction;
    o.generalization = config_.generalization;
    o.parallel = config_.parallel;
    o.clock = clock_;
    return o;
}

ChatOptions Workspace::chat_options() const {
    ChatOptions o;
    o.temperature = config_.chat.temperature;
    o.max_tokens = config_.chat.max_tokens;
    o.context_budget_tokens = config_.context_budget_tokens;
    return o;
}

CharacterRecord Workspace::register_character(const fs::path& corpus_dir) {
    const auto corpus = load_corpus(corpus_dir);
    CharacterRecord record{corpus.character_id, corpus.display_name, fs::absolute(corpus_dir).lexically_normal()};
    store_->register_character(record);
    return record;
}

CharacterCorpus Workspace::corpus(const CharacterId& id) {
    if (auto record = store_->character(id)) return load_corpus(record->corpus_path);
    const fs::path dir = config_.corpus_root / id.str();
    if (!fs::is_directory(dir)) {
        fail(ErrorKind::not_found, "unknown character '" + id.str() + "'; register its corpus first",
             {{"character_id", id.str()}});
    }
    auto record = register_character(dir);
    return load_corpus(record.corpus_path);
}

InitResult Workspace::initialize(const CharacterId& id) {
    const auto c = corpus(id);
    auto lock = store_->lock_writer(id);
    if (auto h = store_->head(id)) {
        fail(ErrorKind::conflict, "character '" + id.str() + "' is already initialized in this lineage",
             {{"head", *h}, {"lineage", store_->lineage()}});
    }
    store_->archive_prompts(prompts_);
    auto result = charactergpt::initialize({c, prompts_, *provider_, cpt_options()});
    store_->put_snapshot(result.snapshot);
    return result;
}

TrainRun Workspace::train(const CharacterId& id, std::optional<int> resume_from,
                          const std::function<void(const EpochResult&)>& on_epoch) {
    const auto c = corpus(id);
    store_->archive_prompts(prompts_);
    return charactergpt::train(c, prompts_, *provider_, *store_, resume_from, cpt_options(), on_epoch);
}

std::vector<EpochDescriptor> Workspace::epochs(const CharacterId& id) const { return store_->list_epochs(id); }

PersonaSnapshot Workspace::snapshot(const CharacterId& id, int epoch) const { return store_->get_snapshot(id, epoch); }

AssembledPersona Workspace::persona(const CharacterId& id, int epoch) {
    const auto snap = store_->get_snapshot(id, epoch);
    const auto c = corpus(id);
    return assemble(snap, build_tone(c, config_.tone_k), c.display_name);
}

CorpusStats Workspace::stats(const CharacterId& id) {
    const auto c = corpus(id);
    std::optional<PersonaSnapshot> latest;
    if (auto h = store_->head(id)) latest = store_->get_snapshot(id, *h);
    return compute_stats(c, latest ? &*latest : nullptr);
}

std::shared_ptr<ChatSession> Workspace::open_session(const CharacterId& id, int epoch, std::string session_id) {
    const auto snap = store_->get_snapshot(id, epoch);
    const auto c = corpus(id);
    return charactergpt::open_session(std::move(session_id), snap, build_tone(c, config_.tone_k), prompts_,
                                      c.display_name, c.language_tag, clock_);
}

eval::FacetScoreTable Workspace::bfi(const CharacterId& id, int epoch, int runs) {
    if (runs < 1) fail(ErrorKind::validation, "--runs must be at least 1");
    const auto snap = store_->get_snapshot(id, epoch);
    const auto c = corpus(id);
    const auto tone = build_tone(c, config_.tone_k);
    const std::string respondent = id.str() + "@epoch" + std::to_string(epoch);
    const auto options = chat_options();

    std::vector<eval::AnswerSheet> sheets;
    for (int r = 1; r <= runs; ++r) {
        sheets.push_back(eval::administer_bfi(bank_, respondent, [&](const eval::BfiItem& item) {
            auto session = charactergpt::open_session(
                "bfi-" + id.str() + "-e" + std::to_string(epoch) + "-r" + std::to_string(r) + "-" + item.id, snap,
                tone, prompts_, c.display_name, c.language_tag, clock_);
            return session->respond(eval::bfi_item_prompt(item), *provider_, options);
        }));
    }
    return eval::score_facets(bank_, sheets);
}

std::vector<eval::StoryTask> Workspace::stories(const CharacterId& id, int epoch, int n) {
    const auto snap = store_->get_snapshot(id, epoch);
    const auto c = corpus(id);
    const auto tone = build_tone(c, config_.tone_k);
    auto factory = [&](int k) {
        return charactergpt::open_session(eval::story_id(id, epoch, k), snap, tone, prompts_, c.display_name,
                                          c.language_tag, clock_);
    };
    auto tasks = eval::run_story_task(factory, *provider_, id, epoch, n, chat_options(), clock_);
    for (const auto& t : tasks) store_->put_document(id, "stories", t.story_id, eval::to_json(t));
    return tasks;
}

}  // namespace charactergpt
