#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>

#include "charactergpt/error.hpp"
#include "charactergpt/gateway.hpp"

namespace charactergpt {

OpenAiProvider::OpenAiProvider(ProviderConfig config)
    : Provider(config.retry, config.max_concurrent), config_(std::move(config)) {
    config_.validate();
    const auto scheme_end = config_.endpoint.find("://") + 3;
    const auto path_start = config_.endpoint.find('/', scheme_end);
    scheme_host_port_ = config_.endpoint.substr(0, path_start);
    base_path_ = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

nlohmann::json OpenAiProvider::wire_request(const CompletionRequest& request) const {
    auto messages = nlohmann::json::array();
    if (!request.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    if (request.attachment) {
        messages.push_back({{"role", "system"},
                            {"content", "Reference document:\n<document>\n" + *request.attachment + "\n</document>"}});
    }
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    return {{"model", config_.model},
            {"messages", std::move(messages)},
            {"max_tokens", request.max_tokens},
            {"temperature", request.temperature}};
}

CompletionResult OpenAiProvider::parse_wire_response(const std::string& body) {
    try {
        const auto doc = nlohmann::json::parse(body);
        const auto& choice = doc.at("choices").at(0);
        CompletionResult result;
        const auto& content = choice.at("message").at("content");
        result.text = content.is_null() ? std::string() : content.get<std::string>();
        const std::string finish = choice.value("finish_reason", "stop");
        result.finish_reason = finish == "length" ? FinishReason::length_cap : FinishReason::complete;
        if (doc.contains("usage")) {
            result.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
            result.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
        }
        return result;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::protocol, std::string("malformed chat-completions payload: ") + e.what());
    }
}

CompletionResult OpenAiProvider::attempt(const CompletionRequest& request) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        fail(ErrorKind::validation, "environment variable " + config_.api_key_env + " is not set");
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(base_path_ + "/chat/completions", headers, wire_request(request).dump(), "application/json");
    if (!res) {
        fail(ErrorKind::transport, "HTTP request to " + scheme_host_port_ + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        fail(ErrorKind::transport, "provider returned HTTP " + std::to_string(res->status), {{"status", res->status}});
    }
    if (res->status != 200) {
        // Some gateways echo request headers in error bodies.
        std::string snippet = res->body;
        for (std::size_t at; (at = snippet.find(key)) != std::string::npos;) {
            snippet.replace(at, std::strlen(key), "[redacted]");
        }
        snippet.resize(std::min<std::size_t>(snippet.size(), 512));
        fail(ErrorKind::protocol, "provider returned HTTP " + std::to_string(res->status),
             {{"status", res->status}, {"body", snippet}});
    }
    return parse_wire_response(res->body);
}

}  // namespace charactergpt
