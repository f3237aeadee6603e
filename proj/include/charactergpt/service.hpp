#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "charactergpt/error.hpp"
#include "charactergpt/workspace.hpp"

namespace charactergpt {

/// HTTP status for an error kind.
int http_status(ErrorKind kind) noexcept;

/// {code, message, details}.
nlohmann::ordered_json error_envelope(const Error& error);

nlohmann::ordered_json openapi_document();

/// JSON-over-HTTP facade for a Workspace, versioned under /v1. Training runs
/// in the background and is polled through /v1/runs/{id}; chat sessions live
/// in memory.
class Service {
public:
    explicit Service(Workspace& workspace);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds to the configured host and port and serves until stop().
    bool listen();
    /// Binds to an ephemeral port on `host`; returns the port, or -1.
    int bind_any_port(const std::string& host = "127.0.0.1");
    /// Serves on a socket bound by bind_any_port(); blocks until stop().
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace charactergpt
