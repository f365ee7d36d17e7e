#pragma once

// Uniform access to chat-completion backends: a remote OpenAI-compatible
// HTTP endpoint and a deterministic scripted mock. Gateway layers caching,
// retry with exponential backoff, single-flight coalescing of identical
// in-flight requests and bounded-parallel batch execution on top of a
// Backend transport.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <unordered_map>
#include <vector>

#include "distill/llm_types.hpp"

namespace distill {

// One transport attempt, no retry and no caching. Implementations throw
// TransientBackendError for failures a retry might fix and BackendRejected
// for permanent ones. The returned text may be empty; the Gateway turns
// that into EmptyCompletion.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string invoke(const LlmRequest& request) = 0;
};

// Deterministic scripted backend for tests and offline runs. Ordered rules
// match against the user message (literal substring, or regex matched
// against the whole message); the first match wins and unmatched requests
// answer "MOCK-NO-RULE". "{h}" in a template interpolates a stable hash of
// the request, so a single rule can yield distinct-but-reproducible
// variants. A rule with a non-empty sequence answers its entries in
// invocation order and repeats the last one once exhausted.
class ScriptedMockBackend : public Backend {
public:
    explicit ScriptedMockBackend(std::vector<MockRule> rules, int delay_ms = 0);

    std::string invoke(const LlmRequest& request) override;

    // Checked before the rules; return std::nullopt to fall through. Lets a
    // test derive answers from the full request instead of pattern tables.
    using Responder = std::function<std::optional<std::string>(const LlmRequest&)>;
    void set_responder(Responder responder);

    // Instrumentation, all thread-safe.
    std::int64_t call_count() const;
    std::int64_t call_count(Purpose purpose) const;
    int peak_concurrency() const;
    std::vector<LlmRequest> captured_requests() const;

private:
    struct RuleState {
        MockRule rule;
        std::optional<std::regex> pattern; // compiled once for Match::Regex
        std::size_t next = 0;              // sequence cursor
    };

    std::string answer_for(const LlmRequest& request);

    mutable std::mutex mu_;
    std::vector<RuleState> rules_;
    int delay_ms_;
    Responder responder_;
    std::int64_t calls_ = 0;
    std::int64_t meta_calls_ = 0;
    std::int64_t task_calls_ = 0;
    int in_flight_ = 0;
    int peak_in_flight_ = 0;
    std::vector<LlmRequest> captured_;
};

// OpenAI-compatible chat-completions client. POSTs {base_url}/chat/completions
// with {model, messages, temperature, max_tokens, seed} and reads
// choices[0].message.content. The bearer key comes from the environment
// variable named in the config; when unset no Authorization header is sent,
// which suits local stub servers.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig config);

    std::string invoke(const LlmRequest& request) override;

private:
    BackendConfig config_;
    std::string origin_;      // scheme://host[:port]
    std::string path_prefix_; // path component of base_url, no trailing slash
};

// Builds the backend the config names. Tests that need mock instrumentation
// construct ScriptedMockBackend directly and share it with the Gateway.
std::shared_ptr<Backend> make_backend(const BackendConfig& config);

// Stable content hash over the canonical request fields (model, system,
// user, temperature, max_tokens, seed). Purpose and endpoint are excluded:
// the same question to the same model is the same cache entry everywhere.
std::string cache_key(const LlmRequest& request);

struct GatewayStats {
    std::int64_t requests = 0;      // complete() invocations
    std::int64_t backend_calls = 0; // transport attempts, retries included
    std::int64_t cache_hits = 0;    // memory, disk and coalesced hits
    std::int64_t retries = 0;       // attempts beyond the first, per request
};

class Gateway {
public:
    // config supplies retry_limit, retry_backoff_ms and cache_dir. Without
    // a cache_dir the disk tier is disabled; the in-memory cache always
    // applies, so repeat requests within one process never re-ask.
    Gateway(std::shared_ptr<Backend> backend, BackendConfig config);

    // Cache lookup, then the backend with retry on transient failures.
    // Successful non-empty responses are cached before returning; empty or
    // whitespace-only text raises EmptyCompletion and is never cached.
    // Concurrent calls with the same cache key coalesce onto one backend
    // call; the extra callers count as cache hits.
    LlmResponse complete(const LlmRequest& request);

    // Sequentially equivalent to complete() per request with at most
    // max_in_flight outstanding at any instant; output order matches input
    // order. On failure the batch drains in-flight work, then throws
    // BatchError for the lowest failing index.
    std::vector<LlmResponse> complete_batch(const std::vector<LlmRequest>& requests,
                                            int max_in_flight);

    GatewayStats stats() const;

private:
    struct InFlight {
        std::mutex mu;
        std::condition_variable cv;
        bool done = false;
        std::string text;
        std::exception_ptr error;
    };

    std::optional<std::string> disk_lookup(const std::string& key) const;
    void disk_store(const std::string& key, const LlmRequest& request, const std::string& text);
    std::string call_with_retry(const LlmRequest& request, int& attempts);

    std::shared_ptr<Backend> backend_;
    BackendConfig config_;

    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> memory_;
    std::unordered_map<std::string, std::shared_ptr<InFlight>> in_flight_;
    GatewayStats stats_;
};

} // namespace distill
