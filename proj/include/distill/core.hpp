#pragma once

// Shared domain vocabulary: tasks, examples, prompt candidates, run
// configuration and epoch records. All types are immutable value objects once
// constructed and safe to share across threads.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distill/llm_types.hpp"

namespace distill {

enum class TaskKind { Classification, Generation };
enum class MetricKind { MacroF1, Meteor };

enum class Stage {
    Seed,
    Variation,
    ExampleEmbedded,
    Compressed,
    Distilled,
    FinalVariation,
};

std::string to_string(TaskKind k);
std::string to_string(MetricKind m);
std::string to_string(Stage s);
TaskKind task_kind_from_string(const std::string& s);
MetricKind metric_from_string(const std::string& s);
Stage stage_from_string(const std::string& s);

// Rank used for deterministic tie-breaking: Seed < ... < FinalVariation.
int stage_rank(Stage s);

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::Classification;
    std::vector<std::string> labels; // ordered; non-empty iff classification
    MetricKind metric = MetricKind::MacroF1;
    std::string instruction_seed; // the dataset-provided baseline prompt

    bool operator==(const TaskSpec&) const = default;
};

struct Example {
    std::string id;
    std::string input;
    std::string output; // gold label (classification) or reference text (generation)

    bool operator==(const Example&) const = default;
};

struct PromptCandidate {
    std::string text;
    int epoch = 0;
    Stage stage = Stage::Seed;
    int gen_index = 0; // creation order within (epoch, stage)
    std::vector<std::string> parent_ids;
    std::optional<double> score; // in [0,1] when present

    // Identity is the (epoch, stage, gen_index) tuple; content hashing would
    // collide when distinct stages emit identical text.
    std::string id() const;

    bool operator==(const PromptCandidate&) const = default;
};

struct CandidateKey {
    int epoch = 0;
    Stage stage = Stage::Seed;
    int gen_index = 0;
};

std::string candidate_id(int epoch, Stage stage, int gen_index);
CandidateKey parse_candidate_id(const std::string& id);

// Meta-prompt templates for the four prompt-transforming stages. Placeholders:
// {prompt}, {prompts}, {examples}; {task_hint} is additionally allowed and
// renders the task's seed instruction.
struct MetaPromptSet {
    std::string variation_template;
    std::string embed_template;
    std::string compress_template;
    std::string aggregate_template;

    static MetaPromptSet defaults(int compress_sentence_cap = 4);

    // Returns one message per placeholder violation; empty means valid.
    std::vector<std::string> validate() const;

    bool operator==(const MetaPromptSet&) const = default;
};

struct RunConfig {
    int n_candidates = 4;        // N: variations per generation stage
    int k_examples = 5;          // K: training examples embedded per candidate
    int epochs = 3;
    double gen_temperature = 0.7; // meta-prompt calls
    double eval_temperature = 0.0; // task predictions
    std::optional<int> eval_subset_size = 100; // nullopt = "all"
    std::int64_t seed = 0;
    int max_in_flight = 8;
    int meta_max_tokens = 1024;
    int task_max_tokens = 256;
    int compress_sentence_cap = 4;
    std::optional<MetaPromptSet> templates; // nullopt = defaults
    BackendConfig backend;

    MetaPromptSet resolved_templates() const {
        return templates ? *templates : MetaPromptSet::defaults(compress_sentence_cap);
    }

    bool operator==(const RunConfig&) const = default;
};

struct ScoredEntry {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredEntry&) const = default;
};

// Complete audit of one epoch: every candidate per stage, the scores of the
// evaluated pool, and the selected incumbent.
struct EpochRecord {
    int epoch = 0;
    PromptCandidate incumbent_in;
    std::map<Stage, std::vector<PromptCandidate>> stage_outputs;
    std::vector<ScoredEntry> scored;
    PromptCandidate incumbent_out;
    std::int64_t llm_calls = 0;  // backend calls during the epoch (cache misses)
    std::int64_t cache_hits = 0;

    bool operator==(const EpochRecord&) const = default;
};

// Outcome of a full optimization: the final incumbent, the complete epoch
// audit trail, aggregate call counters and the exact configuration used.
struct OptimizationResult {
    PromptCandidate best;
    std::vector<EpochRecord> epochs;
    std::int64_t total_llm_calls = 0;
    std::int64_t total_cache_hits = 0;
    RunConfig config_snapshot;

    bool operator==(const OptimizationResult&) const = default;
};

// Returns every violated invariant as a human-readable message, in a fixed
// order; an empty list means the run may start. Total and deterministic.
std::vector<std::string> validate_config(const RunConfig& config, const TaskSpec& task);

} // namespace distill
