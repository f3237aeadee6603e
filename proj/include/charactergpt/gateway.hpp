#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace charactergpt {

enum class Role { user, assistant };
std::string_view to_string(Role role) noexcept;

struct ChatMessage {
    Role role = Role::user;
    std::string text;

    bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
    std::string system_prompt;
    std::vector<ChatMessage> messages;
    int max_tokens = 4096;
    double temperature = 0.7;
    /// Reference document the model should read (chapter summary, info doc).
    std::optional<std::string> attachment;

    void validate() const;
};

/// SHA-256 over (system_prompt, messages, attachment); sampling parameters
/// are not part of the digest.
std::string fingerprint(const CompletionRequest& request);

nlohmann::ordered_json to_json(const CompletionRequest& request);

enum class FinishReason { complete, length_cap, provider_error };
std::string_view to_string(FinishReason reason) noexcept;

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct CompletionResult {
    std::string text;
    FinishReason finish_reason = FinishReason::complete;
    Usage usage;
    std::chrono::milliseconds latency{0};
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};

    std::chrono::milliseconds backoff_for(int attempt) const;
};

struct ProviderConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string model;
    /// Name of the environment variable holding the API key. The key itself
    /// is read at request time and never stored.
    std::string api_key_env = "OPENAI_API_KEY";
    RetryPolicy retry;
    std::chrono::milliseconds timeout{120000};
    int max_concurrent = 4;

    void validate() const;
};

/// Chat-completion boundary. complete() validates the request, enforces the
/// per-provider concurrency cap and retries transport failures; subclasses
/// implement a single upstream attempt.
class Provider {
public:
    explicit Provider(RetryPolicy retry = {}, int max_concurrent = 4);
    virtual ~Provider() = default;

    Provider(const Provider&) = delete;
    Provider& operator=(const Provider&) = delete;

    CompletionResult complete(const CompletionRequest& request);

    virtual std::string model_id() const = 0;

    std::size_t upstream_calls() const noexcept { return upstream_calls_.load(); }
    const RetryPolicy& retry_policy() const noexcept { return retry_; }

    /// Replaces the backoff sleep; tests use this to avoid real waiting.
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

protected:
    /// One upstream call. Throws Error(transport) for retryable failures and
    /// Error(protocol) for unusable payloads.
    virtual CompletionResult attempt(const CompletionRequest& request) = 0;

private:
    RetryPolicy retry_;
    std::counting_semaphore<> slots_;
    std::atomic<std::size_t> upstream_calls_{0};
    std::function<void(std::chrono::milliseconds)> sleeper_;
};

// ---------------------------------------------------------------------------
// Mock provider

/// Pure function of the request (and its fingerprint) producing a reply.
using Responder = std::function<std::string(const CompletionRequest&, const std::string& fingerprint)>;

struct ScriptEntry {
    std::string fingerprint;
    std::string response;
};

/// Rule for the templated responder: the first rule whose `match` text occurs
/// in the request (system prompt, messages or attachment) wins.
struct ResponseRule {
    std::string match;
    std::string response;
};

/// "mock-<first 12 hex of fingerprint>".
Responder digest_responder();

/// Expands {digest} (12 hex chars) and {likert} (1..5 derived from the
/// fingerprint) in the chosen template. Falls back to `fallback_template` when
/// no rule matches.
Responder templated_responder(std::vector<ResponseRule> rules, std::string fallback_template);

/// Deterministic provider answering from a fingerprint script, then the
/// fallback responder. Records every request it receives.
class MockProvider final : public Provider {
public:
    explicit MockProvider(std::vector<ScriptEntry> script = {}, Responder fallback = digest_responder(),
                          std::string model = "mock");

    /// Script file: {"model"?, "script": [{"fingerprint"|"request", "response"}],
    /// "rules"?: [{"match","response"}], "fallback"?: template}.
    static std::unique_ptr<MockProvider> from_file(const std::filesystem::path& path);

    std::string model_id() const override { return model_; }

    std::vector<CompletionRequest> call_log() const;
    void clear_call_log();

protected:
    CompletionResult attempt(const CompletionRequest& request) override;

private:
    std::map<std::string, std::string> script_;
    Responder fallback_;
    std::string model_;
    mutable std::mutex log_mutex_;
    std::vector<CompletionRequest> log_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP provider

class OpenAiProvider final : public Provider {
public:
    explicit OpenAiProvider(ProviderConfig config);

    std::string model_id() const override { return config_.model; }
    const ProviderConfig& config() const noexcept { return config_; }

    /// Request body sent upstream (exposed for wire-format tests).
    nlohmann::json wire_request(const CompletionRequest& request) const;
    /// Parses a chat-completions response body; throws Error(protocol).
    static CompletionResult parse_wire_response(const std::string& body);

protected:
    CompletionResult attempt(const CompletionRequest& request) override;

private:
    ProviderConfig config_;
    std::string scheme_host_port_;
    std::string base_path_;
};

}  // namespace charactergpt
