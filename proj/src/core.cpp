#include "distill/core.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "distill/errors.hpp"
#include "distill/text.hpp"

namespace distill {

std::string to_string(TaskKind k) {
    return k == TaskKind::Classification ? "classification" : "generation";
}

std::string to_string(MetricKind m) {
    return m == MetricKind::MacroF1 ? "macro_f1" : "meteor";
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Seed: return "seed";
        case Stage::Variation: return "variation";
        case Stage::ExampleEmbedded: return "example_embedded";
        case Stage::Compressed: return "compressed";
        case Stage::Distilled: return "distilled";
        case Stage::FinalVariation: return "final_variation";
    }
    throw std::logic_error("unknown stage");
}

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::Classification;
    if (s == "generation") return TaskKind::Generation;
    throw PreconditionError("unknown task kind: " + s);
}

MetricKind metric_from_string(const std::string& s) {
    if (s == "macro_f1") return MetricKind::MacroF1;
    if (s == "meteor") return MetricKind::Meteor;
    throw PreconditionError("unknown metric: " + s);
}

Stage stage_from_string(const std::string& s) {
    for (Stage st : {Stage::Seed, Stage::Variation, Stage::ExampleEmbedded, Stage::Compressed,
                     Stage::Distilled, Stage::FinalVariation}) {
        if (to_string(st) == s) return st;
    }
    throw PreconditionError("unknown stage: " + s);
}

int stage_rank(Stage s) {
    return static_cast<int>(s);
}

std::string candidate_id(int epoch, Stage stage, int gen_index) {
    return "e" + std::to_string(epoch) + "-" + to_string(stage) + "-" + std::to_string(gen_index);
}

std::string PromptCandidate::id() const {
    return candidate_id(epoch, stage, gen_index);
}

CandidateKey parse_candidate_id(const std::string& id) {
    // Format: e<epoch>-<stage>-<gen_index>
    if (id.size() < 2 || id[0] != 'e') throw PreconditionError("malformed candidate id: " + id);
    std::size_t first = id.find('-');
    std::size_t last = id.rfind('-');
    if (first == std::string::npos || last == first)
        throw PreconditionError("malformed candidate id: " + id);
    try {
        CandidateKey key;
        key.epoch = std::stoi(id.substr(1, first - 1));
        key.stage = stage_from_string(id.substr(first + 1, last - first - 1));
        key.gen_index = std::stoi(id.substr(last + 1));
        return key;
    } catch (const std::logic_error&) {
        throw PreconditionError("malformed candidate id: " + id);
    }
}

MetaPromptSet MetaPromptSet::defaults(int compress_sentence_cap) {
    MetaPromptSet t;
    t.variation_template =
        "Rewrite the following prompt to approach the task from a different angle while "
        "preserving its goal. Output only the rewritten prompt.\n\nPrompt: {prompt}";
    t.embed_template =
        "Here is a prompt and labeled examples of its task. Identify the underlying principles "
        "needed to solve these examples and revise the prompt to incorporate them without "
        "mentioning the specific examples. Output only the revised prompt.\n\nPrompt: "
        "{prompt}\n\nExamples:\n{examples}";
    t.compress_template =
        "Condense the following prompt into at most " + std::to_string(compress_sentence_cap) +
        " sentences, keeping the task objective and the key solving principles. Output only the "
        "condensed prompt.\n\nPrompt: {prompt}";
    t.aggregate_template =
        "Merge the following prompts into one prompt that captures all of their distinct ideas "
        "without redundancy. Output only the merged prompt.\n\nPrompts:\n{prompts}";
    return t;
}

namespace {

const std::vector<std::string> kPlaceholderVocab = {"{prompt}", "{prompts}", "{examples}",
                                                     "{task_hint}"};

void check_template(const std::string& name, const std::string& text,
                    const std::vector<std::string>& required, std::vector<std::string>& out) {
    for (const auto& ph : required) {
        if (!contains(text, ph)) out.push_back(name + " must contain " + ph);
    }
    for (const auto& ph : kPlaceholderVocab) {
        bool allowed = ph == "{task_hint}" ||
                       std::find(required.begin(), required.end(), ph) != required.end();
        if (!allowed && contains(text, ph)) out.push_back(name + " must not contain " + ph);
    }
}

} // namespace

std::vector<std::string> MetaPromptSet::validate() const {
    std::vector<std::string> out;
    check_template("variation_template", variation_template, {"{prompt}"}, out);
    check_template("embed_template", embed_template, {"{prompt}", "{examples}"}, out);
    check_template("compress_template", compress_template, {"{prompt}"}, out);
    check_template("aggregate_template", aggregate_template, {"{prompts}"}, out);
    return out;
}

std::vector<std::string> validate_config(const RunConfig& config, const TaskSpec& task) {
    std::vector<std::string> v;

    if (config.n_candidates < 1) v.push_back("n_candidates must be ≥ 1");
    if (config.k_examples < 1) v.push_back("k_examples must be ≥ 1");
    if (config.epochs < 1) v.push_back("epochs must be ≥ 1");
    if (config.gen_temperature < 0.0) v.push_back("gen_temperature must be ≥ 0");
    if (config.gen_temperature > 2.0) v.push_back("gen_temperature must be ≤ 2");
    if (config.eval_temperature < 0.0) v.push_back("eval_temperature must be ≥ 0");
    if (config.eval_temperature > 2.0) v.push_back("eval_temperature must be ≤ 2");
    if (config.eval_subset_size && *config.eval_subset_size < 1)
        v.push_back("eval_subset_size must be ≥ 1");
    if (config.max_in_flight < 1) v.push_back("max_in_flight must be ≥ 1");
    if (config.meta_max_tokens < 1) v.push_back("meta_max_tokens must be ≥ 1");
    if (config.task_max_tokens < 1) v.push_back("task_max_tokens must be ≥ 1");
    if (config.compress_sentence_cap < 1) v.push_back("compress_sentence_cap must be ≥ 1");

    const auto& backend = config.backend;
    if (backend.kind == BackendKind::HttpOpenAiCompatible && !backend.base_url)
        v.push_back("backend.base_url is required for http_openai_compatible backends");
    if (backend.model.empty()) v.push_back("backend.model must be non-empty");
    if (backend.timeout_ms < 1) v.push_back("backend.timeout_ms must be ≥ 1");
    if (backend.retry_limit < 0) v.push_back("backend.retry_limit must be ≥ 0");
    if (backend.retry_backoff_ms < 0) v.push_back("backend.retry_backoff_ms must be ≥ 0");

    if (task.kind == TaskKind::Classification && task.labels.empty())
        v.push_back("labels must be non-empty for classification tasks");
    if (task.kind == TaskKind::Generation && !task.labels.empty())
        v.push_back("labels must be empty for generation tasks");
    {
        std::set<std::string> unique(task.labels.begin(), task.labels.end());
        if (unique.size() != task.labels.size()) v.push_back("labels must be unique");
    }
    bool metric_matches = (task.kind == TaskKind::Classification &&
                           task.metric == MetricKind::MacroF1) ||
                          (task.kind == TaskKind::Generation && task.metric == MetricKind::Meteor);
    if (!metric_matches) v.push_back("metric/kind mismatch");
    if (trim(task.instruction_seed).empty())
        v.push_back("instruction_seed must be non-empty");

    for (auto& msg : config.resolved_templates().validate()) v.push_back(msg);

    return v;
}

} // namespace distill
