#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace charactergpt {

enum class ErrorKind {
    validation,    // malformed input data
    precondition,  // operation called in the wrong state
    not_found,
    conflict,
    transport,     // network or rate-limit failure talking to a provider
    protocol,      // provider answered with something we cannot use
    internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Error carrying a machine-readable kind plus structured details.
/// The service layer turns these into {code, message, details} envelopes and
/// the CLI maps them onto its exit-code contract.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, nlohmann::json details = nlohmann::json::object())
        : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const nlohmann::json& details() const noexcept { return details_; }

    /// Transport failures are retryable unless explicitly marked otherwise.
    bool retryable() const noexcept {
        return kind_ == ErrorKind::transport && !details_.value("permanent", false);
    }

private:
    ErrorKind kind_;
    nlohmann::json details_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message,
                              nlohmann::json details = nlohmann::json::object()) {
    throw Error(kind, message, std::move(details));
}

}  // namespace charactergpt
