#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charactergpt/clock.hpp"
#include "charactergpt/corpus.hpp"
#include "charactergpt/cpt.hpp"
#include "charactergpt/eval/bfi.hpp"
#include "charactergpt/eval/stories.hpp"
#include "charactergpt/gateway.hpp"
#include "charactergpt/inference.hpp"
#include "charactergpt/initializer.hpp"
#include "charactergpt/prompts.hpp"
#include "charactergpt/store.hpp"

namespace charactergpt {

struct ProviderSettings {
    std::string kind = "openai";  // "openai" or "mock"
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-4";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_attempts = 3;
    int backoff_ms = 500;
    int timeout_ms = 120000;
    int max_concurrent = 4;
    std::filesystem::path script;  // mock only; empty means digest replies

    /// "mock", "mock:<script.json>" or "openai:<model>".
    static ProviderSettings parse(std::string_view spec);
};

std::unique_ptr<Provider> make_provider(const ProviderSettings& settings);

/// Runtime configuration shared by the CLI and the HTTP service. Loaded from
/// JSON; relative paths resolve against the config file's directory.
struct AppConfig {
    std::filesystem::path store_root = "store";
    std::filesystem::path corpus_root = "corpus";
    std::filesystem::path prompts_dir = default_prompts_dir();
    std::optional<std::filesystem::path> bfi_bank;  // placeholder bank when unset
    ProviderSettings provider;
    bool fixed_clock = false;
    bool parallel = true;
    std::size_t tone_k = 20;
    std::size_t context_budget_tokens = 120000;
    CallParams extraction;
    CallParams generalization;
    CallParams chat;

    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> cors_allowlist;
    std::size_t body_limit = 4 * 1024 * 1024;

    static AppConfig load(const std::filesystem::path& path);
    static AppConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
};

/// Everything one process needs to drive the pipeline for a store: the
/// prompt set, the provider, the store and the BFI bank.
class Workspace {
public:
    explicit Workspace(AppConfig config, std::unique_ptr<Provider> provider = nullptr);

    const AppConfig& config() const noexcept { return config_; }
    const PromptSet& prompts() const noexcept { return prompts_; }
    Provider& provider() noexcept { return *provider_; }
    PersonaStore& store() noexcept { return *store_; }
    const eval::BfiQuestionBank& bfi_bank() const noexcept { return bank_; }
    std::shared_ptr<const Clock> clock() const noexcept { return clock_; }

    CptOptions cpt_options() const;
    ChatOptions chat_options() const;

    /// Validates the corpus and records it in the store registry. The id
    /// defaults to the corpus directory name.
    CharacterRecord register_character(const std::filesystem::path& corpus_dir);
    /// Registered corpus, or <corpus_root>/<id> (registered on first use).
    CharacterCorpus corpus(const CharacterId& id);

    /// Writes epoch 0. Conflict if the lineage already has snapshots.
    InitResult initialize(const CharacterId& id);
    TrainRun train(const CharacterId& id, std::optional<int> resume_from = std::nullopt,
                   const std::function<void(const EpochResult&)>& on_epoch = {});

    std::vector<EpochDescriptor> epochs(const CharacterId& id) const;
    PersonaSnapshot snapshot(const CharacterId& id, int epoch) const;
    AssembledPersona persona(const CharacterId& id, int epoch);
    CorpusStats stats(const CharacterId& id);

    std::shared_ptr<ChatSession> open_session(const CharacterId& id, int epoch, std::string session_id);

    /// Administers the bank `runs` times, one fresh session per item, and
    /// scores the sheets together.
    eval::FacetScoreTable bfi(const CharacterId& id, int epoch, int runs);
    /// Generates and persists n stories under <lineage>/stories/.
    std::vector<eval::StoryTask> stories(const CharacterId& id, int epoch, int n);

private:
    AppConfig config_;
    std::shared_ptr<const Clock> clock_;
    PromptSet prompts_;
    std::unique_ptr<Provider> provider_;
    std::unique_ptr<PersonaStore> store_;
    eval::BfiQuestionBank bank_;
};

}  // namespace charactergpt
