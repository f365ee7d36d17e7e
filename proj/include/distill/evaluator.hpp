#pragma once

// Scores prompt candidates on a dataset: builds per-example task prompts,
// collects predictions through the gateway, extracts labels or text and
// computes the task metric. Also owns deterministic best-candidate selection
// and the few-shot baseline mode.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "distill/core.hpp"
#include "distill/gateway.hpp"

namespace distill {

struct EvalOutcome {
    std::string example_id;
    std::string raw_output;
    std::string extracted;                    // matched label, or generated text
    std::optional<std::string> matched_label; // classification only; nullopt = unparseable

    bool operator==(const EvalOutcome&) const = default;
};

struct ScoredCandidate {
    std::string candidate_id;
    double score = 0.0;
    std::vector<EvalOutcome> outcomes;

    bool operator==(const ScoredCandidate&) const = default;
};

// Builds the task request for one example. system = candidate text, plus an
// answer-format directive listing the labels for classification tasks. Empty
// shots = zero-shot (user is the raw input); otherwise the user message holds
// one Input/Output block per demonstration and ends with the target input.
// A shot sharing the evaluated example's id violates the precondition.
LlmRequest build_task_prompt(const PromptCandidate& candidate, const Example& example,
                             const TaskSpec& task, const RunConfig& config,
                             const std::vector<Example>& shots = {});

// Label-extraction cascade over a raw completion: exact normalized match,
// then whole-word substring with the earliest occurrence winning (ties go to
// earlier label order), else nullopt. Total; never throws.
std::optional<std::string> extract_label(const std::string& raw,
                                         const std::vector<std::string>& labels);

// Zero-shot scoring: one TaskPrediction request per example through
// complete_batch, label extraction or raw text per the task kind, macro F1
// or mean METEOR. Gateway failures propagate; the candidate stays unscored.
ScoredCandidate score_candidate(const PromptCandidate& candidate,
                                const std::vector<Example>& eval_set, const TaskSpec& task,
                                Gateway& gateway, const RunConfig& config);

// Few-shot baseline scoring: each example gets the first n_shots members of
// shot_pool whose id differs from its own. shot_pool comes pre-sampled from
// the training set; pass one spare (n_shots + 1 members) when the pool can
// overlap the eval set.
ScoredCandidate score_candidate_few_shot(const PromptCandidate& candidate,
                                         const std::vector<Example>& eval_set,
                                         const std::vector<Example>& shot_pool, int n_shots,
                                         const TaskSpec& task, Gateway& gateway,
                                         const RunConfig& config);

// Argmax by score over a non-empty, fully scored pool. Ties break toward the
// earliest (epoch, stage, gen_index) parsed from candidate_id, a total order.
std::size_t select_best_index(const std::vector<ScoredCandidate>& pool);
const ScoredCandidate& select_best(const std::vector<ScoredCandidate>& pool);

} // namespace distill
