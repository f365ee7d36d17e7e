#pragma once

// The five-stage optimization epoch and the outer loop: variation, example
// embedding, compression, aggregation, final variation, then argmax selection
// against the cached incumbent. All randomness is derived from the run seed,
// so a resumed run continues on identical streams without saved RNG state.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "distill/core.hpp"
#include "distill/data_io.hpp"
#include "distill/evaluator.hpp"
#include "distill/gateway.hpp"

namespace distill {

// Outcome of scoring the seed prompt, persisted once per run so a resumed
// run reuses it instead of re-measuring (keeps call totals reproducible).
struct SeedScoring {
    PromptCandidate seed; // score set
    int eval_examples = 0; // frozen subset size, recorded for reporting
    std::int64_t llm_calls = 0;
    std::int64_t cache_hits = 0;

    bool operator==(const SeedScoring&) const = default;
};

// Continuation point for a resumed run: the persisted seed scoring and every
// completed epoch record, in order.
struct ResumeState {
    SeedScoring seed;
    std::vector<EpochRecord> completed;
};

// Persistence and interruption callbacks, wired in by the CLI. All optional.
struct EngineHooks {
    // Called once after the seed prompt is scored (not on resume).
    std::function<void(const SeedScoring&)> on_seed;
    // Called after each completed epoch, before the next starts.
    std::function<void(const EpochRecord&)> on_epoch;
    // Polled between epochs; returning true raises RunInterrupted, leaving
    // the completed prefix persisted and resumable.
    std::function<bool()> stop_requested;
};

class Engine {
public:
    // The evaluation subset is frozen here from (config.eval_subset_size,
    // config.seed) and reused for every candidate across all epochs.
    Engine(TaskSpec task, Dataset train, RunConfig config, Gateway& gateway);

    // Stage 1 and Stage 5: n rewrites of base at gen_temperature, each with
    // its own derived seed. Empty completions fall back to one re-ask, then
    // to base.text verbatim.
    std::vector<PromptCandidate> generate_variations(const PromptCandidate& base, int n,
                                                     int epoch, Stage stage);

    // Stage 2: revises the candidate against K labeled examples, asking for
    // the principles behind them rather than the examples themselves.
    PromptCandidate embed_examples(const PromptCandidate& candidate,
                                   const std::vector<Example>& examples, int epoch);

    // Stage 3: condenses to at most compress_sentence_cap sentences.
    PromptCandidate compress(const PromptCandidate& candidate, int epoch);

    // Stage 4: merges all compressed candidates into the one Distilled
    // candidate; its fallback is the first parent's text.
    PromptCandidate aggregate(const std::vector<PromptCandidate>& candidates, int epoch);

    // The per-candidate Stage-2 sample, exposed for determinism tests.
    std::vector<Example> sample_stage2_examples(int epoch, int gen_index) const;

    // One full epoch: stages 1-5, scoring of {Distilled, FinalVariations},
    // argmax over those plus the already-scored incumbent.
    EpochRecord run_epoch(const PromptCandidate& incumbent, int epoch);

    // Scores the seed prompt, then runs config.epochs epochs threading
    // incumbent_out into the next epoch. With a ResumeState, continues after
    // the completed prefix instead of starting over.
    OptimizationResult optimize(const EngineHooks& hooks = {},
                                const std::optional<ResumeState>& resume = std::nullopt);

    const std::vector<Example>& eval_subset() const { return eval_; }
    const TaskSpec& task() const { return task_; }
    const RunConfig& config() const { return config_; }

private:
    std::string meta_call(const std::string& rendered, int epoch, Stage stage, int gen_index,
                          const std::string& fallback);

    TaskSpec task_;
    Dataset train_;
    RunConfig config_;
    Gateway& gateway_;
    MetaPromptSet templates_;
    std::vector<Example> eval_;
};

} // namespace distill
