#pragma once

// Chat-completion exchange types shared by the gateway, the engine and the
// evaluator. One LlmRequest is single-turn (optional system + user) and is
// the unit of response caching.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace distill {

enum class Purpose {
    MetaGeneration, // prompt-transforming calls issued by the engine stages
    TaskPrediction, // per-example task calls issued by the evaluator
};

struct LlmRequest {
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.0;
    int max_tokens = 256;
    std::optional<std::int64_t> seed;
    std::string model;
    Purpose purpose = Purpose::MetaGeneration; // telemetry only, excluded from cache keys

    bool operator==(const LlmRequest&) const = default;
};

struct LlmResponse {
    std::string text;
    bool from_cache = false;
    int latency_ms = 0;
    int attempt_count = 1;
};

enum class BackendKind {
    HttpOpenAiCompatible,
    ScriptedMock,
};

// One scripted-mock rule: first match wins, "{h}" in the template interpolates
// a stable hash of the request. A non-empty sequence overrides the template
// and is consumed in invocation order (last entry sticks).
struct MockRule {
    enum class Match { Substring, Regex }; // Regex is anchored (whole user message)
    Match match = Match::Substring;
    std::string pattern;
    std::string template_text;
    std::vector<std::string> sequence;

    bool operator==(const MockRule&) const = default;
};

struct BackendConfig {
    BackendKind kind = BackendKind::ScriptedMock;
    std::optional<std::string> base_url; // required for HttpOpenAiCompatible
    std::string model = "mock-model";
    std::string api_key_env = "LLM_API_KEY";
    int timeout_ms = 30000;
    int retry_limit = 3;
    int retry_backoff_ms = 250;
    std::optional<std::string> cache_dir; // default: <run_dir>/cache, resolved by the CLI
    std::vector<MockRule> mock_rules;     // ScriptedMock only
    int mock_delay_ms = 0;                // ScriptedMock only

    bool operator==(const BackendConfig&) const = default;
};

} // namespace distill
