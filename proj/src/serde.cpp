#include "distill/serde.hpp"

#include <atomic>
#include <fstream>
#include <initializer_list>
#include <thread>
#include <unordered_set>

#include "distill/errors.hpp"

namespace distill {

using nlohmann::json;

namespace {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it != j.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

std::string backend_kind_name(BackendKind k) {
    return k == BackendKind::HttpOpenAiCompatible ? "http_openai_compatible" : "scripted_mock";
}

BackendKind backend_kind_from(const std::string& s) {
    if (s == "http_openai_compatible") return BackendKind::HttpOpenAiCompatible;
    if (s == "scripted_mock") return BackendKind::ScriptedMock;
    throw Error("unknown backend kind: " + s);
}

std::string match_name(MockRule::Match m) {
    return m == MockRule::Match::Substring ? "substring" : "regex";
}

MockRule::Match match_from(const std::string& s) {
    if (s == "substring") return MockRule::Match::Substring;
    if (s == "regex") return MockRule::Match::Regex;
    throw Error("unknown mock rule match kind: " + s);
}

} // namespace

void to_json(json& j, const TaskSpec& v) {
    j = json{{"name", v.name},
             {"kind", to_string(v.kind)},
             {"labels", v.labels},
             {"metric", to_string(v.metric)},
             {"instruction_seed", v.instruction_seed}};
}

void from_json(const json& j, TaskSpec& v) {
    v.name = j.at("name").get<std::string>();
    v.kind = task_kind_from_string(j.at("kind").get<std::string>());
    v.labels.clear();
    get_if_present(j, "labels", v.labels);
    v.metric = metric_from_string(j.at("metric").get<std::string>());
    v.instruction_seed = j.at("instruction_seed").get<std::string>();
}

void to_json(json& j, const Example& v) {
    j = json{{"id", v.id}, {"input", v.input}, {"output", v.output}};
}

void from_json(const json& j, Example& v) {
    v.id = j.at("id").get<std::string>();
    v.input = j.at("input").get<std::string>();
    v.output = j.at("output").get<std::string>();
}

void to_json(json& j, const PromptCandidate& v) {
    j = json{{"text", v.text},
             {"epoch", v.epoch},
             {"stage", to_string(v.stage)},
             {"gen_index", v.gen_index},
             {"parent_ids", v.parent_ids},
             {"score", v.score ? json(*v.score) : json()}};
}

void from_json(const json& j, PromptCandidate& v) {
    v.text = j.at("text").get<std::string>();
    v.epoch = j.at("epoch").get<int>();
    v.stage = stage_from_string(j.at("stage").get<std::string>());
    v.gen_index = j.at("gen_index").get<int>();
    v.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
    v.score = get_optional<double>(j, "score");
}

void to_json(json& j, const MetaPromptSet& v) {
    j = json{{"variation_template", v.variation_template},
             {"embed_template", v.embed_template},
             {"compress_template", v.compress_template},
             {"aggregate_template", v.aggregate_template}};
}

void from_json(const json& j, MetaPromptSet& v) {
    v.variation_template = j.at("variation_template").get<std::string>();
    v.embed_template = j.at("embed_template").get<std::string>();
    v.compress_template = j.at("compress_template").get<std::string>();
    v.aggregate_template = j.at("aggregate_template").get<std::string>();
}

void to_json(json& j, const MockRule& v) {
    j = json{{"match", match_name(v.match)},
             {"pattern", v.pattern},
             {"template_text", v.template_text},
             {"sequence", v.sequence}};
}

void from_json(const json& j, MockRule& v) {
    v = MockRule{};
    std::string match = match_name(v.match);
    get_if_present(j, "match", match);
    v.match = match_from(match);
    v.pattern = j.at("pattern").get<std::string>();
    get_if_present(j, "template_text", v.template_text);
    get_if_present(j, "sequence", v.sequence);
}

void to_json(json& j, const BackendConfig& v) {
    j = json{{"kind", backend_kind_name(v.kind)},
             {"base_url", v.base_url ? json(*v.base_url) : json()},
             {"model", v.model},
             {"api_key_env", v.api_key_env},
             {"timeout_ms", v.timeout_ms},
             {"retry_limit", v.retry_limit},
             {"retry_backoff_ms", v.retry_backoff_ms},
             {"cache_dir", v.cache_dir ? json(*v.cache_dir) : json()},
             {"mock_rules", v.mock_rules},
             {"mock_delay_ms", v.mock_delay_ms}};
}

void from_json(const json& j, BackendConfig& v) {
    v = BackendConfig{};
    std::string kind = backend_kind_name(v.kind);
    get_if_present(j, "kind", kind);
    v.kind = backend_kind_from(kind);
    v.base_url = get_optional<std::string>(j, "base_url");
    get_if_present(j, "model", v.model);
    get_if_present(j, "api_key_env", v.api_key_env);
    get_if_present(j, "timeout_ms", v.timeout_ms);
    get_if_present(j, "retry_limit", v.retry_limit);
    get_if_present(j, "retry_backoff_ms", v.retry_backoff_ms);
    v.cache_dir = get_optional<std::string>(j, "cache_dir");
    get_if_present(j, "mock_rules", v.mock_rules);
    get_if_present(j, "mock_delay_ms", v.mock_delay_ms);
}

void to_json(json& j, const RunConfig& v) {
    j = json{{"n_candidates", v.n_candidates},
             {"k_examples", v.k_examples},
             {"epochs", v.epochs},
             {"gen_temperature", v.gen_temperature},
             {"eval_temperature", v.eval_temperature},
             {"eval_subset_size", v.eval_subset_size ? json(*v.eval_subset_size) : json("all")},
             {"seed", v.seed},
             {"max_in_flight", v.max_in_flight},
             {"meta_max_tokens", v.meta_max_tokens},
             {"task_max_tokens", v.task_max_tokens},
             {"compress_sentence_cap", v.compress_sentence_cap},
             {"templates", v.templates ? json(*v.templates) : json()},
             {"backend", v.backend}};
}

void from_json(const json& j, RunConfig& v) {
    v = RunConfig{};
    get_if_present(j, "n_candidates", v.n_candidates);
    get_if_present(j, "k_examples", v.k_examples);
    get_if_present(j, "epochs", v.epochs);
    get_if_present(j, "gen_temperature", v.gen_temperature);
    get_if_present(j, "eval_temperature", v.eval_temperature);
    if (auto it = j.find("eval_subset_size"); it != j.end() && !it->is_null()) {
        if (it->is_string()) {
            if (it->get<std::string>() != "all")
                throw Error("eval_subset_size must be an integer or \"all\"");
            v.eval_subset_size = std::nullopt;
        } else {
            v.eval_subset_size = it->get<int>();
        }
    }
    get_if_present(j, "seed", v.seed);
    get_if_present(j, "max_in_flight", v.max_in_flight);
    get_if_present(j, "meta_max_tokens", v.meta_max_tokens);
    get_if_present(j, "task_max_tokens", v.task_max_tokens);
    get_if_present(j, "compress_sentence_cap", v.compress_sentence_cap);
    v.templates = get_optional<MetaPromptSet>(j, "templates");
    get_if_present(j, "backend", v.backend);
}

void to_json(json& j, const ScoredEntry& v) {
    j = json{{"id", v.id}, {"score", v.score}};
}

void from_json(const json& j, ScoredEntry& v) {
    v.id = j.at("id").get<std::string>();
    v.score = j.at("score").get<double>();
}

void to_json(json& j, const EpochRecord& v) {
    json outputs = json::object();
    for (const auto& [stage, candidates] : v.stage_outputs)
        outputs[to_string(stage)] = candidates;
    j = json{{"epoch", v.epoch},
             {"incumbent_in", v.incumbent_in},
             {"stage_outputs", outputs},
             {"scored", v.scored},
             {"incumbent_out", v.incumbent_out},
             {"llm_calls", v.llm_calls},
             {"cache_hits", v.cache_hits}};
}

void from_json(const json& j, EpochRecord& v) {
    v.epoch = j.at("epoch").get<int>();
    v.incumbent_in = j.at("incumbent_in").get<PromptCandidate>();
    v.stage_outputs.clear();
    for (const auto& [key, value] : j.at("stage_outputs").items())
        v.stage_outputs[stage_from_string(key)] = value.get<std::vector<PromptCandidate>>();
    v.scored = j.at("scored").get<std::vector<ScoredEntry>>();
    v.incumbent_out = j.at("incumbent_out").get<PromptCandidate>();
    v.llm_calls = j.at("llm_calls").get<std::int64_t>();
    v.cache_hits = j.at("cache_hits").get<std::int64_t>();
}

void to_json(json& j, const OptimizationResult& v) {
    j = json{{"best", v.best},
             {"epochs", v.epochs},
             {"total_llm_calls", v.total_llm_calls},
             {"total_cache_hits", v.total_cache_hits},
             {"config_snapshot", v.config_snapshot}};
}

void from_json(const json& j, OptimizationResult& v) {
    v.best = j.at("best").get<PromptCandidate>();
    v.epochs = j.at("epochs").get<std::vector<EpochRecord>>();
    v.total_llm_calls = j.at("total_llm_calls").get<std::int64_t>();
    v.total_cache_hits = j.at("total_cache_hits").get<std::int64_t>();
    v.config_snapshot = j.at("config_snapshot").get<RunConfig>();
}

void to_json(json& j, const LlmRequest& v) {
    j = json{{"model", v.model},
             {"system", v.system ? json(*v.system) : json()},
             {"user", v.user},
             {"temperature", v.temperature},
             {"max_tokens", v.max_tokens},
             {"seed", v.seed ? json(*v.seed) : json()}};
}

void from_json(const json& j, LlmRequest& v) {
    v = LlmRequest{};
    v.model = j.at("model").get<std::string>();
    v.system = get_optional<std::string>(j, "system");
    v.user = j.at("user").get<std::string>();
    v.temperature = j.at("temperature").get<double>();
    v.max_tokens = j.at("max_tokens").get<int>();
    v.seed = get_optional<std::int64_t>(j, "seed");
}

void to_json(json& j, const ConfigDocument& v) {
    j = json{{"task", v.task}, {"run", v.run}};
}

void from_json(const json& j, ConfigDocument& v) {
    v.task = j.at("task").get<TaskSpec>();
    v.run = j.at("run").get<RunConfig>();
}

namespace {

// Structural checks for operator-written configuration files. Collects every
// problem instead of stopping at the first, so one edit cycle fixes them all.
class StructureChecker {
public:
    std::vector<std::string> violations;

    void require_object(const json& j, const std::string& ctx) {
        if (!j.is_object()) violations.push_back(ctx + " must be a JSON object");
    }

    void check_keys(const json& obj, const std::string& ctx,
                    std::initializer_list<const char*> required,
                    std::initializer_list<const char*> optional) {
        if (!obj.is_object()) return;
        std::unordered_set<std::string> allowed;
        for (const char* k : required) {
            allowed.insert(k);
            if (!obj.contains(k)) violations.push_back(ctx + " is missing required key \"" + k + "\"");
        }
        for (const char* k : optional) allowed.insert(k);
        for (const auto& [key, value] : obj.items()) {
            (void)value;
            if (!allowed.count(key)) violations.push_back(ctx + " has unknown key \"" + key + "\"");
        }
    }

    void expect_string(const json& obj, const char* key, const std::string& ctx) {
        auto it = obj.find(key);
        if (it != obj.end() && !it->is_string())
            violations.push_back(ctx + "." + key + " must be a string");
    }

    void expect_opt_string(const json& obj, const char* key, const std::string& ctx) {
        auto it = obj.find(key);
        if (it != obj.end() && !it->is_null() && !it->is_string())
            violations.push_back(ctx + "." + key + " must be a string or null");
    }

    void expect_integer(const json& obj, const char* key, const std::string& ctx) {
        auto it = obj.find(key);
        if (it != obj.end() && !it->is_number_integer())
            violations.push_back(ctx + "." + key + " must be an integer");
    }

    void expect_number(const json& obj, const char* key, const std::string& ctx) {
        auto it = obj.find(key);
        if (it != obj.end() && !it->is_number())
            violations.push_back(ctx + "." + key + " must be a number");
    }

    void expect_string_array(const json& obj, const char* key, const std::string& ctx) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        if (!it->is_array()) {
            violations.push_back(ctx + "." + key + " must be an array of strings");
            return;
        }
        for (const auto& entry : *it) {
            if (!entry.is_string()) {
                violations.push_back(ctx + "." + key + " must be an array of strings");
                return;
            }
        }
    }

    void expect_enum(const json& obj, const char* key, const std::string& ctx,
                     std::initializer_list<const char*> values) {
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_string()) return; // type reported elsewhere
        const std::string got = it->get<std::string>();
        for (const char* v : values)
            if (got == v) return;
        std::string message = ctx + "." + key + " must be one of:";
        for (const char* v : values) message += std::string(" \"") + v + "\"";
        violations.push_back(message);
    }
};

std::vector<std::string> check_config_structure(const json& root) {
    StructureChecker c;
    c.require_object(root, "config");
    if (!root.is_object()) return c.violations;
    c.check_keys(root, "config", {"task", "run"}, {});

    if (auto it = root.find("task"); it != root.end()) {
        const json& task = *it;
        c.require_object(task, "task");
        c.check_keys(task, "task", {"name", "kind", "metric", "instruction_seed"}, {"labels"});
        c.expect_string(task, "name", "task");
        c.expect_string(task, "kind", "task");
        c.expect_enum(task, "kind", "task", {"classification", "generation"});
        c.expect_string(task, "metric", "task");
        c.expect_enum(task, "metric", "task", {"macro_f1", "meteor"});
        c.expect_string(task, "instruction_seed", "task");
        c.expect_string_array(task, "labels", "task");
    }

    if (auto it = root.find("run"); it != root.end()) {
        const json& run = *it;
        c.require_object(run, "run");
        c.check_keys(run, "run", {},
                     {"n_candidates", "k_examples", "epochs", "gen_temperature",
                      "eval_temperature", "eval_subset_size", "seed", "max_in_flight",
                      "meta_max_tokens", "task_max_tokens", "compress_sentence_cap", "templates",
                      "backend"});
        if (!run.is_object()) return c.violations;
        for (const char* key : {"n_candidates", "k_examples", "epochs", "seed", "max_in_flight",
                                "meta_max_tokens", "task_max_tokens", "compress_sentence_cap"})
            c.expect_integer(run, key, "run");
        c.expect_number(run, "gen_temperature", "run");
        c.expect_number(run, "eval_temperature", "run");
        if (auto s = run.find("eval_subset_size"); s != run.end()) {
            const bool ok = s->is_number_integer() || (s->is_string() && s->get<std::string>() == "all");
            if (!ok) c.violations.push_back("run.eval_subset_size must be an integer or \"all\"");
        }
        if (auto t = run.find("templates"); t != run.end() && !t->is_null()) {
            c.require_object(*t, "run.templates");
            c.check_keys(*t, "run.templates",
                         {"variation_template", "embed_template", "compress_template",
                          "aggregate_template"},
                         {});
            for (const char* key : {"variation_template", "embed_template", "compress_template",
                                    "aggregate_template"})
                c.expect_string(*t, key, "run.templates");
        }
        if (auto b = run.find("backend"); b != run.end()) {
            const json& backend = *b;
            c.require_object(backend, "run.backend");
            if (backend.is_object()) {
                c.check_keys(backend, "run.backend", {},
                             {"kind", "base_url", "model", "api_key_env", "timeout_ms",
                              "retry_limit", "retry_backoff_ms", "cache_dir", "mock_rules",
                              "mock_delay_ms"});
                c.expect_enum(backend, "kind", "run.backend",
                              {"http_openai_compatible", "scripted_mock"});
                c.expect_string(backend, "kind", "run.backend");
                c.expect_opt_string(backend, "base_url", "run.backend");
                c.expect_string(backend, "model", "run.backend");
                c.expect_string(backend, "api_key_env", "run.backend");
                c.expect_integer(backend, "timeout_ms", "run.backend");
                c.expect_integer(backend, "retry_limit", "run.backend");
                c.expect_integer(backend, "retry_backoff_ms", "run.backend");
                c.expect_opt_string(backend, "cache_dir", "run.backend");
                c.expect_integer(backend, "mock_delay_ms", "run.backend");
                if (auto rules = backend.find("mock_rules"); rules != backend.end()) {
                    if (!rules->is_array()) {
                        c.violations.push_back("run.backend.mock_rules must be an array");
                    } else {
                        int index = 0;
                        for (const auto& rule : *rules) {
                            const std::string ctx =
                                "run.backend.mock_rules[" + std::to_string(index) + "]";
                            c.require_object(rule, ctx);
                            if (rule.is_object()) {
                                c.check_keys(rule, ctx, {"pattern"},
                                             {"match", "template_text", "sequence"});
                                c.expect_string(rule, "pattern", ctx);
                                c.expect_string(rule, "template_text", ctx);
                                c.expect_enum(rule, "match", ctx, {"substring", "regex"});
                                c.expect_string_array(rule, "sequence", ctx);
                                const bool has_template =
                                    rule.contains("template_text") || rule.contains("sequence");
                                if (!has_template)
                                    c.violations.push_back(
                                        ctx + " needs template_text or a sequence");
                            }
                            ++index;
                        }
                    }
                }
            }
        }
    }
    return c.violations;
}

} // namespace

ConfigDocument load_config_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot open config file: " + path.string()});
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError({std::string("config parse error: ") + e.what()});
    }
    auto violations = check_config_structure(root);
    if (!violations.empty()) throw ConfigError(std::move(violations));
    return root.get<ConfigDocument>();
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::filesystem::path& path, const json& j) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    static std::atomic<std::uint64_t> counter{0};
    const auto tmp = path.string() + ".tmp-" + std::to_string(counter.fetch_add(1)) + "-" +
                     std::to_string(static_cast<std::uint64_t>(
                         std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot write file: " + tmp);
        out << canonical_dump(j);
        out.flush();
        if (!out) throw StoreError("write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw StoreError("cannot move " + tmp + " into place: " + ec.message());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot open file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw StoreError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace distill
