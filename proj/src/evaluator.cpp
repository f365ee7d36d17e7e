#include "distill/evaluator.hpp"

#include <algorithm>

#include "distill/errors.hpp"
#include "distill/metrics.hpp"
#include "distill/text.hpp"

namespace distill {

namespace {

std::string label_directive(const std::vector<std::string>& labels) {
    std::string out = "Answer with exactly one of: ";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += ", ";
        out += labels[i];
    }
    out += ".";
    return out;
}

std::string demonstration_block(const Example& shot) {
    return "Input: " + shot.input + "\nOutput: " + shot.output;
}

// Whole-word occurrence: the match is not flanked by alphanumerics.
std::size_t find_whole_word(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return std::string::npos;
    std::size_t pos = haystack.find(needle);
    while (pos != std::string::npos) {
        const bool left_ok = pos == 0 || !is_alnum(haystack[pos - 1]);
        const std::size_t end = pos + needle.size();
        const bool right_ok = end == haystack.size() || !is_alnum(haystack[end]);
        if (left_ok && right_ok) return pos;
        pos = haystack.find(needle, pos + 1);
    }
    return std::string::npos;
}

} // namespace

LlmRequest build_task_prompt(const PromptCandidate& candidate, const Example& example,
                             const TaskSpec& task, const RunConfig& config,
                             const std::vector<Example>& shots) {
    for (const Example& shot : shots)
        if (shot.id == example.id)
            throw PreconditionError("demonstration \"" + shot.id +
                                    "\" overlaps the evaluated example");

    LlmRequest request;
    request.system = candidate.text;
    if (task.kind == TaskKind::Classification)
        *request.system += "\n\n" + label_directive(task.labels);

    if (shots.empty()) {
        request.user = example.input;
    } else {
        std::string user;
        for (const Example& shot : shots) {
            user += demonstration_block(shot);
            user += "\n\n";
        }
        user += "Input: " + example.input + "\nOutput:";
        request.user = std::move(user);
    }

    request.temperature = config.eval_temperature;
    request.max_tokens = config.task_max_tokens;
    request.seed = config.seed;
    request.model = config.backend.model;
    request.purpose = Purpose::TaskPrediction;
    return request;
}

std::optional<std::string> extract_label(const std::string& raw,
                                         const std::vector<std::string>& labels) {
    const std::string folded = lower_ascii(trim(raw));
    const std::string stripped = strip_punct_edges(folded);

    for (const std::string& label : labels)
        if (stripped == lower_ascii(trim(label))) return label;

    std::size_t best_pos = std::string::npos;
    const std::string* best_label = nullptr;
    for (const std::string& label : labels) {
        const std::size_t pos = find_whole_word(folded, lower_ascii(trim(label)));
        if (pos != std::string::npos && pos < best_pos) { // strict: ties keep label order
            best_pos = pos;
            best_label = &label;
        }
    }
    if (best_label) return *best_label;
    return std::nullopt;
}

namespace {

ScoredCandidate score_with_shots(const PromptCandidate& candidate,
                                 const std::vector<Example>& eval_set, const TaskSpec& task,
                                 Gateway& gateway, const RunConfig& config,
                                 const std::vector<std::vector<Example>>& per_example_shots) {
    if (eval_set.empty()) throw PreconditionError("eval_set must be non-empty");

    std::vector<LlmRequest> requests;
    requests.reserve(eval_set.size());
    for (std::size_t i = 0; i < eval_set.size(); ++i)
        requests.push_back(build_task_prompt(
            candidate, eval_set[i], task, config,
            per_example_shots.empty() ? std::vector<Example>{} : per_example_shots[i]));

    const std::vector<LlmResponse> responses =
        gateway.complete_batch(requests, config.max_in_flight);

    ScoredCandidate scored;
    scored.candidate_id = candidate.id();
    scored.outcomes.reserve(eval_set.size());

    if (task.kind == TaskKind::Classification) {
        std::vector<LabelPair> pairs;
        pairs.reserve(eval_set.size());
        for (std::size_t i = 0; i < eval_set.size(); ++i) {
            EvalOutcome outcome;
            outcome.example_id = eval_set[i].id;
            outcome.raw_output = responses[i].text;
            outcome.matched_label = extract_label(responses[i].text, task.labels);
            outcome.extracted = outcome.matched_label.value_or("");
            pairs.emplace_back(outcome.matched_label, eval_set[i].output);
            scored.outcomes.push_back(std::move(outcome));
        }
        scored.score = macro_f1(pairs, task.labels);
    } else {
        double sum = 0.0;
        for (std::size_t i = 0; i < eval_set.size(); ++i) {
            EvalOutcome outcome;
            outcome.example_id = eval_set[i].id;
            outcome.raw_output = responses[i].text;
            outcome.extracted = responses[i].text;
            sum += meteor(responses[i].text, eval_set[i].output);
            scored.outcomes.push_back(std::move(outcome));
        }
        scored.score = sum / static_cast<double>(eval_set.size());
    }
    return scored;
}

} // namespace

ScoredCandidate score_candidate(const PromptCandidate& candidate,
                                const std::vector<Example>& eval_set, const TaskSpec& task,
                                Gateway& gateway, const RunConfig& config) {
    return score_with_shots(candidate, eval_set, task, gateway, config, {});
}

ScoredCandidate score_candidate_few_shot(const PromptCandidate& candidate,
                                         const std::vector<Example>& eval_set,
                                         const std::vector<Example>& shot_pool, int n_shots,
                                         const TaskSpec& task, Gateway& gateway,
                                         const RunConfig& config) {
    if (n_shots < 1) throw PreconditionError("n_shots must be ≥ 1");
    if (static_cast<int>(shot_pool.size()) < n_shots)
        throw PreconditionError("shot pool smaller than n_shots");

    std::vector<std::vector<Example>> per_example_shots;
    per_example_shots.reserve(eval_set.size());
    for (const Example& example : eval_set) {
        std::vector<Example> shots;
        for (const Example& shot : shot_pool) {
            if (shot.id == example.id) continue;
            shots.push_back(shot);
            if (static_cast<int>(shots.size()) == n_shots) break;
        }
        if (static_cast<int>(shots.size()) < n_shots)
            throw PreconditionError("example \"" + example.id + "\": shot pool has fewer than " +
                                    std::to_string(n_shots) + " disjoint demonstrations");
        per_example_shots.push_back(std::move(shots));
    }
    return score_with_shots(candidate, eval_set, task, gateway, config, per_example_shots);
}

std::size_t select_best_index(const std::vector<ScoredCandidate>& pool) {
    if (pool.empty()) throw PreconditionError("selection pool must be non-empty");

    auto order_key = [](const ScoredCandidate& c) {
        const CandidateKey key = parse_candidate_id(c.candidate_id);
        return std::tuple(key.epoch, stage_rank(key.stage), key.gen_index);
    };

    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
        if (pool[i].score > pool[best].score ||
            (pool[i].score == pool[best].score && order_key(pool[i]) < order_key(pool[best])))
            best = i;
    }
    return best;
}

const ScoredCandidate& select_best(const std::vector<ScoredCandidate>& pool) {
    return pool[select_best_index(pool)];
}

} // namespace distill
