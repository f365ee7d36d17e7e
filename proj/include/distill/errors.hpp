#pragma once

#include <exception>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace distill {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A contract violation: the caller passed arguments a precondition forbids.
struct PreconditionError : Error {
    using Error::Error;
};

// Configuration rejected by validate_config; carries every violation message.
struct ConfigError : Error {
    explicit ConfigError(std::vector<std::string> violations_)
        : Error(join(violations_)), violations(std::move(violations_)) {}

    std::vector<std::string> violations;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid configuration";
        for (const auto& m : v) {
            out += "\n  - ";
            out += m;
        }
        return out;
    }
};

// ── dataset loading ──────────────────────────────────────────────

struct DataError : Error {
    DataError(std::string msg, long line_ = -1) : Error(std::move(msg)), line(line_) {}
    long line; // 1-based line number, -1 when not line-scoped
};

struct MalformedRecord : DataError {
    using DataError::DataError;
};

struct LabelOutsideTaskSet : DataError {
    using DataError::DataError;
};

struct EmptyDataset : DataError {
    using DataError::DataError;
};

// ── LLM gateway ──────────────────────────────────────────────────

struct GatewayError : Error {
    using Error::Error;
};

// Transport-level failure a retry might fix (5xx, 429, timeout). Internal to
// the retry loop; callers outside the gateway see BackendUnreachable instead.
struct TransientBackendError : GatewayError {
    using GatewayError::GatewayError;
};

// Retries exhausted on transport errors.
struct BackendUnreachable : GatewayError {
    BackendUnreachable(const std::string& msg, int attempts_)
        : GatewayError(msg), attempts(attempts_) {}
    int attempts;
};

// Non-retryable rejection (4xx other than 429, malformed response body).
struct BackendRejected : GatewayError {
    explicit BackendRejected(const std::string& msg, int status_ = 0)
        : GatewayError(msg), status(status_) {}
    int status;
};

// The backend answered with empty or whitespace-only text. Never cached;
// the caller decides whether to re-ask.
struct EmptyCompletion : GatewayError {
    using GatewayError::GatewayError;
};

// Failure inside complete_batch, annotated with the failing request index.
struct BatchError : GatewayError {
    BatchError(std::size_t index_, std::exception_ptr inner_, const std::string& inner_msg)
        : GatewayError("request " + std::to_string(index_) + ": " + inner_msg),
          index(index_),
          inner(std::move(inner_)) {}
    std::size_t index;
    std::exception_ptr inner;
};

// ── run persistence / control ────────────────────────────────────

struct StoreError : Error {
    using Error::Error;
};

// Raised between epochs when a stop was requested; the run directory holds a
// resumable state at this point.
struct RunInterrupted : Error {
    using Error::Error;
};

} // namespace distill
