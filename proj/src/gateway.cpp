#include "charactergpt/gateway.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "charactergpt/digest.hpp"
#include "charactergpt/error.hpp"

namespace charactergpt {

std::string_view to_string(Role role) noexcept { return role == Role::user ? "user" : "assistant"; }

std::string_view to_string(FinishReason reason) noexcept {
    switch (reason) {
        case FinishReason::complete: return "complete";
        case FinishReason::length_cap: return "length_cap";
        case FinishReason::provider_error: return "provider_error";
    }
    return "provider_error";
}

void CompletionRequest::validate() const {
    if (messages.empty() && !attachment) {
        fail(ErrorKind::precondition, "completion request needs at least one message or an attachment");
    }
    if (max_tokens < 1) {
        fail(ErrorKind::precondition, "max_tokens must be >= 1", {{"max_tokens", max_tokens}});
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        fail(ErrorKind::precondition, "temperature must lie in [0, 2]", {{"temperature", temperature}});
    }
}

nlohmann::ordered_json to_json(const CompletionRequest& request) {
    auto messages = nlohmann::ordered_json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"text", m.text}});
    return {{"system_prompt", request.system_prompt},
            {"messages", std::move(messages)},
            {"max_tokens", request.max_tokens},
            {"temperature", request.temperature},
            {"attachment", request.attachment ? nlohmann::ordered_json(*request.attachment) : nlohmann::ordered_json()}};
}

std::string fingerprint(const CompletionRequest& request) {
    auto doc = to_json(request);
    doc.erase("max_tokens");
    doc.erase("temperature");
    return sha256_hex(doc.dump());
}

std::chrono::milliseconds RetryPolicy::backoff_for(int attempt) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 1; i < attempt; ++i) ms *= multiplier;
    return std::min(std::chrono::milliseconds(static_cast<long long>(ms)), max_backoff);
}

void ProviderConfig::validate() const {
    if (retry.max_attempts < 1) fail(ErrorKind::validation, "retry.max_attempts must be >= 1");
    if (max_concurrent < 1) fail(ErrorKind::validation, "max_concurrent must be >= 1");
    if (model.empty()) fail(ErrorKind::validation, "provider model must be set");
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
        fail(ErrorKind::validation, "provider endpoint must be an http(s) URL: " + endpoint);
    }
}

Provider::Provider(RetryPolicy retry, int max_concurrent)
    : retry_(retry),
      slots_(max_concurrent),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    if (retry_.max_attempts < 1) fail(ErrorKind::validation, "retry.max_attempts must be >= 1");
    if (max_concurrent < 1) fail(ErrorKind::validation, "max_concurrent must be >= 1");
}

namespace {

struct SlotGuard {
    std::counting_semaphore<>& sem;
    explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
};

}  // namespace

CompletionResult Provider::complete(const CompletionRequest& request) {
    request.validate();
    SlotGuard slot(slots_);
    auto attempts = nlohmann::json::array();
    for (int n = 1; n <= retry_.max_attempts; ++n) {
        ++upstream_calls_;
        const auto started = std::chrono::steady_clock::now();
        try {
            CompletionResult result = attempt(request);
            result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
            return result;
        } catch (const Error& e) {
            if (!e.retryable()) throw;
            attempts.push_back({{"attempt", n}, {"error", e.what()}});
            if (n < retry_.max_attempts) sleeper_(retry_.backoff_for(n));
        }
    }
    fail(ErrorKind::transport,
         "provider " + model_id() + " failed after " + std::to_string(retry_.max_attempts) + " attempt(s): " +
             attempts.back().at("error").get<std::string>(),
         {{"attempts", attempts}, {"permanent", true}});
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string request_text(const CompletionRequest& r) {
    std::string all = r.system_prompt;
    for (const auto& m : r.messages) {
        all += '\n';
        all += m.text;
    }
    if (r.attachment) {
        all += '\n';
        all += *r.attachment;
    }
    return all;
}

std::string expand(std::string tmpl, const std::string& fp) {
    const std::string digest = fp.substr(0, 12);
    const std::string likert = std::to_string(1 + std::stoul(fp.substr(0, 8), nullptr, 16) % 5);
    for (auto [key, value] : {std::pair<std::string, std::string>{"{digest}", digest}, {"{likert}", likert}}) {
        for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size())) {
            tmpl.replace(pos, key.size(), value);
        }
    }
    return tmpl;
}

}  // namespace

Responder digest_responder() {
    return [](const CompletionRequest&, const std::string& fp) { return "mock-" + fp.substr(0, 12); };
}

Responder templated_responder(std::vector<ResponseRule> rules, std::string fallback_template) {
    return [rules = std::move(rules), fallback = std::move(fallback_template)](const CompletionRequest& r,
                                                                                const std::string& fp) {
        const std::string text = request_text(r);
        for (const auto& rule : rules) {
            if (text.find(rule.match) != std::string::npos) return expand(rule.response, fp);
        }
        return expand(fallback, fp);
    };
}

MockProvider::MockProvider(std::vector<ScriptEntry> script, Responder fallback, std::string model)
    : Provider(RetryPolicy{1, {}, 1.0, {}}, 64), fallback_(std::move(fallback)), model_(std::move(model)) {
    for (auto& entry : script) {
        if (!script_.emplace(entry.fingerprint, std::move(entry.response)).second) {
            fail(ErrorKind::validation, "mock script has two entries for fingerprint " + entry.fingerprint,
                 {{"fingerprint", entry.fingerprint}});
        }
    }
    if (!fallback_) fail(ErrorKind::validation, "mock provider needs a fallback responder");
}

std::unique_ptr<MockProvider> MockProvider::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::validation, "cannot read mock script " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
        std::vector<ScriptEntry> script;
        for (const auto& e : doc.value("script", nlohmann::json::array())) {
            std::string fp;
            if (e.contains("fingerprint")) {
                fp = e.at("fingerprint").get<std::string>();
            } else {
                const auto& req = e.at("request");
                CompletionRequest r;
                r.system_prompt = req.value("system_prompt", "");
                for (const auto& m : req.value("messages", nlohmann::json::array())) {
                    r.messages.push_back({m.value("role", "user") == "assistant" ? Role::assistant : Role::user,
                                          m.at("text").get<std::string>()});
                }
                if (req.contains("attachment") && !req.at("attachment").is_null()) {
                    r.attachment = req.at("attachment").get<std::string>();
                }
                fp = fingerprint(r);
            }
            script.push_back({fp, e.at("response").get<std::string>()});
        }
        std::vector<ResponseRule> rules;
        for (const auto& r : doc.value("rules", nlohmann::json::array())) {
            rules.push_back({r.at("match").get<std::string>(), r.at("response").get<std::string>()});
        }
        auto responder = templated_responder(std::move(rules), doc.value("fallback", std::string("mock-{digest}")));
        return std::make_unique<MockProvider>(std::move(script), std::move(responder), doc.value("model", "mock"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, "malformed mock script " + path.string() + ": " + e.what());
    }
}

CompletionResult MockProvider::attempt(const CompletionRequest& request) {
    const std::string fp = fingerprint(request);
    {
        std::lock_guard lock(log_mutex_);
        log_.push_back(request);
    }
    CompletionResult result;
    auto it = script_.find(fp);
    result.text = it != script_.end() ? it->second : fallback_(request, fp);
    result.usage.completion_tokens = static_cast<int>(result.text.size() / 4);
    return result;
}

std::vector<CompletionRequest> MockProvider::call_log() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

void MockProvider::clear_call_log() {
    std::lock_guard lock(log_mutex_);
    log_.clear();
}

}  // namespace charactergpt
