#include "distill/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <thread>
#include <utility>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "distill/errors.hpp"
#include "distill/rng.hpp"
#include "distill/serde.hpp"

namespace distill {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kNoRuleSentinel = "MOCK-NO-RULE";

void validate_request(const LlmRequest& request) {
    if (request.user.empty())
        throw PreconditionError("request.user must be non-empty");
    if (request.temperature < 0.0 || request.temperature > 2.0)
        throw PreconditionError("request.temperature must be in [0, 2]");
    if (request.max_tokens < 1)
        throw PreconditionError("request.max_tokens must be ≥ 1");
}

std::string canonical_request_text(const LlmRequest& request) {
    return canonical_dump(json(request));
}

std::string to_hex(const unsigned char* bytes, std::size_t n) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(digits[bytes[i] >> 4]);
        out.push_back(digits[bytes[i] & 0xF]);
    }
    return out;
}

std::string hash_hex16(const LlmRequest& request) {
    const std::uint64_t h = fnv1a64(canonical_request_text(request));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string interpolate_hash(const std::string& tmpl, const LlmRequest& request) {
    const std::string marker = "{h}";
    std::string::size_type pos = tmpl.find(marker);
    if (pos == std::string::npos) return tmpl;
    const std::string h = hash_hex16(request);
    std::string out;
    out.reserve(tmpl.size() + h.size());
    std::string::size_type start = 0;
    while (pos != std::string::npos) {
        out.append(tmpl, start, pos - start);
        out += h;
        start = pos + marker.size();
        pos = tmpl.find(marker, start);
    }
    out.append(tmpl, start, std::string::npos);
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool all_whitespace(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace

// ── scripted mock ────────────────────────────────────────────────

ScriptedMockBackend::ScriptedMockBackend(std::vector<MockRule> rules, int delay_ms)
    : delay_ms_(delay_ms) {
    rules_.reserve(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        RuleState state;
        state.rule = std::move(rules[i]);
        if (state.rule.match == MockRule::Match::Regex) {
            try {
                state.pattern.emplace(state.rule.pattern);
            } catch (const std::regex_error& e) {
                throw Error("mock rule " + std::to_string(i) + ": invalid regex \"" +
                            state.rule.pattern + "\": " + e.what());
            }
        }
        rules_.push_back(std::move(state));
    }
}

void ScriptedMockBackend::set_responder(Responder responder) {
    std::lock_guard lock(mu_);
    responder_ = std::move(responder);
}

std::string ScriptedMockBackend::answer_for(const LlmRequest& request) {
    std::lock_guard lock(mu_);
    for (RuleState& state : rules_) {
        const bool hit = state.rule.match == MockRule::Match::Substring
                             ? request.user.find(state.rule.pattern) != std::string::npos
                             : std::regex_match(request.user, *state.pattern);
        if (!hit) continue;
        if (!state.rule.sequence.empty()) {
            const std::size_t i = std::min(state.next, state.rule.sequence.size() - 1);
            ++state.next;
            return state.rule.sequence[i];
        }
        return interpolate_hash(state.rule.template_text, request);
    }
    return kNoRuleSentinel;
}

std::string ScriptedMockBackend::invoke(const LlmRequest& request) {
    Responder responder;
    {
        std::lock_guard lock(mu_);
        ++calls_;
        (request.purpose == Purpose::MetaGeneration ? meta_calls_ : task_calls_)++;
        captured_.push_back(request);
        ++in_flight_;
        peak_in_flight_ = std::max(peak_in_flight_, in_flight_);
        responder = responder_;
    }

    std::string text;
    if (responder) {
        if (auto forced = responder(request)) text = std::move(*forced);
        else text = answer_for(request);
    } else {
        text = answer_for(request);
    }

    if (delay_ms_ > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));

    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    return text;
}

std::int64_t ScriptedMockBackend::call_count() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::int64_t ScriptedMockBackend::call_count(Purpose purpose) const {
    std::lock_guard lock(mu_);
    return purpose == Purpose::MetaGeneration ? meta_calls_ : task_calls_;
}

int ScriptedMockBackend::peak_concurrency() const {
    std::lock_guard lock(mu_);
    return peak_in_flight_;
}

std::vector<LlmRequest> ScriptedMockBackend::captured_requests() const {
    std::lock_guard lock(mu_);
    return captured_;
}

// ── HTTP backend ─────────────────────────────────────────────────

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (!config_.base_url.has_value())
        throw ConfigError({"backend.base_url is required for http_openai_compatible backends"});
    const std::string& url = *config_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos ||
        (url.compare(0, scheme_end, "http") != 0 && url.compare(0, scheme_end, "https") != 0))
        throw ConfigError({"backend.base_url must start with http:// or https://"});
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = url;
    } else {
        origin_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string HttpBackend::invoke(const LlmRequest& request) {
    json body;
    body["model"] = request.model;
    json messages = json::array();
    if (request.system.has_value())
        messages.push_back({{"role", "system"}, {"content", *request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (request.seed.has_value()) body["seed"] = *request.seed;

    // One client per call keeps concurrent batch workers independent.
    httplib::Client client(origin_);
    client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res)
        throw TransientBackendError("connection to " + origin_ +
                                    " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransientBackendError("HTTP " + std::to_string(res->status) + " from " + origin_);
    if (res->status < 200 || res->status >= 300)
        throw BackendRejected("HTTP " + std::to_string(res->status) + " from " + origin_,
                              res->status);

    try {
        const json reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw BackendRejected("malformed response body from " + origin_);
    }
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::ScriptedMock)
        return std::make_shared<ScriptedMockBackend>(config.mock_rules, config.mock_delay_ms);
    return std::make_shared<HttpBackend>(config);
}

// ── gateway ──────────────────────────────────────────────────────

std::string cache_key(const LlmRequest& request) {
    const std::string text = canonical_request_text(request);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
    return to_hex(digest, len);
}

Gateway::Gateway(std::shared_ptr<Backend> backend, BackendConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
    if (!backend_) throw PreconditionError("gateway needs a backend");
    if (config_.retry_limit < 0) throw PreconditionError("retry_limit must be ≥ 0");
}

std::optional<std::string> Gateway::disk_lookup(const std::string& key) const {
    if (!config_.cache_dir.has_value()) return std::nullopt;
    const fs::path path = fs::path(*config_.cache_dir) / (key + ".json");
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        return read_json_file(path).at("response_text").get<std::string>();
    } catch (const std::exception&) {
        return std::nullopt; // unreadable entry behaves like a miss
    }
}

void Gateway::disk_store(const std::string& key, const LlmRequest& request,
                         const std::string& text) {
    if (!config_.cache_dir.has_value()) return;
    json entry;
    entry["request"] = request;
    entry["response_text"] = text;
    entry["created_at"] = utc_timestamp();
    write_json_file(fs::path(*config_.cache_dir) / (key + ".json"), entry);
}

std::string Gateway::call_with_retry(const LlmRequest& request, int& attempts) {
    attempts = 0;
    for (;;) {
        ++attempts;
        {
            std::lock_guard lock(mu_);
            ++stats_.backend_calls;
            if (attempts > 1) ++stats_.retries;
        }
        try {
            return backend_->invoke(request);
        } catch (const TransientBackendError& e) {
            if (attempts > config_.retry_limit)
                throw BackendUnreachable(std::string(e.what()) + " (" +
                                             std::to_string(attempts) + " attempts)",
                                         attempts);
            const long long backoff =
                static_cast<long long>(config_.retry_backoff_ms)
                << std::min(attempts - 1, 16);
            if (backoff > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        }
    }
}

LlmResponse Gateway::complete(const LlmRequest& request) {
    validate_request(request);
    const std::string key = cache_key(request);

    std::shared_ptr<InFlight> flight;
    bool owner = false;
    {
        std::lock_guard lock(mu_);
        ++stats_.requests;
        if (auto it = memory_.find(key); it != memory_.end()) {
            ++stats_.cache_hits;
            return {it->second, true, 0, 1};
        }
        if (auto it = in_flight_.find(key); it != in_flight_.end()) {
            flight = it->second;
        } else {
            flight = std::make_shared<InFlight>();
            in_flight_.emplace(key, flight);
            owner = true;
        }
    }

    if (!owner) {
        std::unique_lock lock(flight->mu);
        flight->cv.wait(lock, [&] { return flight->done; });
        if (flight->error) std::rethrow_exception(flight->error);
        std::lock_guard stats_lock(mu_);
        ++stats_.cache_hits;
        return {flight->text, true, 0, 1};
    }

    auto settle = [&](const std::string* text, std::exception_ptr error) {
        {
            std::lock_guard lock(flight->mu);
            flight->done = true;
            if (text) flight->text = *text;
            flight->error = std::move(error);
        }
        flight->cv.notify_all();
        std::lock_guard lock(mu_);
        if (text) memory_[key] = *text;
        in_flight_.erase(key);
    };

    try {
        if (auto cached = disk_lookup(key)) {
            settle(&*cached, nullptr);
            std::lock_guard lock(mu_);
            ++stats_.cache_hits;
            return {*cached, true, 0, 1};
        }

        const auto start = std::chrono::steady_clock::now();
        int attempts = 0;
        const std::string text = call_with_retry(request, attempts);
        const int latency = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count());

        if (text.empty() || all_whitespace(text))
            throw EmptyCompletion("backend returned empty completion");

        disk_store(key, request, text);
        settle(&text, nullptr);
        return {text, false, latency, attempts};
    } catch (...) {
        settle(nullptr, std::current_exception());
        throw;
    }
}

std::vector<LlmResponse> Gateway::complete_batch(const std::vector<LlmRequest>& requests,
                                                 int max_in_flight) {
    if (max_in_flight < 1) throw PreconditionError("max_in_flight must be ≥ 1");
    const std::size_t n = requests.size();
    std::vector<LlmResponse> out(n);
    if (n == 0) return out;

    std::mutex mu;
    std::size_t next = 0;
    std::size_t fail_index = n;
    std::exception_ptr fail_error;
    std::string fail_msg;

    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (fail_index != n || next >= n) return;
                i = next++;
            }
            try {
                LlmResponse response = complete(requests[i]);
                std::lock_guard lock(mu);
                out[i] = std::move(response);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                if (i < fail_index) {
                    fail_index = i;
                    fail_error = std::current_exception();
                    fail_msg = e.what();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(max_in_flight));
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    if (fail_index != n) throw BatchError(fail_index, fail_error, fail_msg);
    return out;
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

} // namespace distill
