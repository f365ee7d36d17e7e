#include "distill/engine.hpp"

#include <utility>

#include "distill/errors.hpp"
#include "distill/rng.hpp"
#include "distill/text.hpp"

namespace distill {

namespace {

std::string format_examples(const std::vector<Example>& examples) {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "Input: " + examples[i].input + "\nExpected output: " + examples[i].output;
    }
    return out;
}

std::string format_prompt_list(const std::vector<PromptCandidate>& candidates) {
    std::string out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += std::to_string(i + 1) + ". " + candidates[i].text;
    }
    return out;
}

} // namespace

Engine::Engine(TaskSpec task, Dataset train, RunConfig config, Gateway& gateway)
    : task_(std::move(task)),
      train_(std::move(train)),
      config_(std::move(config)),
      gateway_(gateway),
      templates_(config_.resolved_templates()),
      eval_(freeze_eval_subset(train_, config_.eval_subset_size, config_.seed)) {}

std::string Engine::meta_call(const std::string& rendered, int epoch, Stage stage,
                              int gen_index, const std::string& fallback) {
    LlmRequest request;
    request.user = rendered;
    request.temperature = config_.gen_temperature;
    request.max_tokens = config_.meta_max_tokens;
    request.model = config_.backend.model;
    request.purpose = Purpose::MetaGeneration;

    for (int attempt = 0; attempt < 2; ++attempt) {
        request.seed = static_cast<std::int64_t>(derive_seed(
            static_cast<std::uint64_t>(config_.seed),
            {fnv1a64("meta"), static_cast<std::uint64_t>(epoch),
             static_cast<std::uint64_t>(stage_rank(stage)),
             static_cast<std::uint64_t>(gen_index), static_cast<std::uint64_t>(attempt)}));
        try {
            return trim(gateway_.complete(request).text);
        } catch (const EmptyCompletion&) {
            // re-ask once with a fresh seed, then fall back to the parent text
        }
    }
    return fallback;
}

std::vector<PromptCandidate> Engine::generate_variations(const PromptCandidate& base, int n,
                                                         int epoch, Stage stage) {
    if (n < 1) throw PreconditionError("variation count must be ≥ 1");
    if (base.text.empty()) throw PreconditionError("variation base text must be non-empty");
    if (stage != Stage::Variation && stage != Stage::FinalVariation)
        throw PreconditionError("variations carry stage Variation or FinalVariation");

    std::string rendered = replace_all(templates_.variation_template, "{prompt}", base.text);
    rendered = replace_all(std::move(rendered), "{task_hint}", task_.instruction_seed);

    std::vector<PromptCandidate> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        PromptCandidate candidate;
        candidate.text = meta_call(rendered, epoch, stage, i, base.text);
        candidate.epoch = epoch;
        candidate.stage = stage;
        candidate.gen_index = i;
        candidate.parent_ids = {base.id()};
        out.push_back(std::move(candidate));
    }
    return out;
}

PromptCandidate Engine::embed_examples(const PromptCandidate& candidate,
                                       const std::vector<Example>& examples, int epoch) {
    if (static_cast<int>(examples.size()) != config_.k_examples)
        throw PreconditionError("embed_examples needs exactly k_examples examples");
    if (candidate.stage != Stage::Variation)
        throw PreconditionError("embed_examples takes a Variation candidate");

    std::string rendered = replace_all(templates_.embed_template, "{prompt}", candidate.text);
    rendered = replace_all(std::move(rendered), "{examples}", format_examples(examples));
    rendered = replace_all(std::move(rendered), "{task_hint}", task_.instruction_seed);

    PromptCandidate out;
    out.text = meta_call(rendered, epoch, Stage::ExampleEmbedded, candidate.gen_index,
                         candidate.text);
    out.epoch = epoch;
    out.stage = Stage::ExampleEmbedded;
    out.gen_index = candidate.gen_index;
    out.parent_ids = {candidate.id()};
    return out;
}

PromptCandidate Engine::compress(const PromptCandidate& candidate, int epoch) {
    if (candidate.stage != Stage::ExampleEmbedded)
        throw PreconditionError("compress takes an ExampleEmbedded candidate");

    std::string rendered = replace_all(templates_.compress_template, "{prompt}", candidate.text);
    rendered = replace_all(std::move(rendered), "{task_hint}", task_.instruction_seed);

    PromptCandidate out;
    out.text = meta_call(rendered, epoch, Stage::Compressed, candidate.gen_index,
                         candidate.text);
    out.epoch = epoch;
    out.stage = Stage::Compressed;
    out.gen_index = candidate.gen_index;
    out.parent_ids = {candidate.id()};
    return out;
}

PromptCandidate Engine::aggregate(const std::vector<PromptCandidate>& candidates, int epoch) {
    if (candidates.empty()) throw PreconditionError("aggregate needs at least one candidate");
    for (const PromptCandidate& c : candidates)
        if (c.stage != Stage::Compressed)
            throw PreconditionError("aggregate takes Compressed candidates");

    std::string rendered =
        replace_all(templates_.aggregate_template, "{prompts}", format_prompt_list(candidates));
    rendered = replace_all(std::move(rendered), "{task_hint}", task_.instruction_seed);

    PromptCandidate out;
    out.text = meta_call(rendered, epoch, Stage::Distilled, 0, candidates.front().text);
    out.epoch = epoch;
    out.stage = Stage::Distilled;
    out.gen_index = 0;
    out.parent_ids.reserve(candidates.size());
    for (const PromptCandidate& c : candidates) out.parent_ids.push_back(c.id());
    return out;
}

std::vector<Example> Engine::sample_stage2_examples(int epoch, int gen_index) const {
    return sample_examples(train_, config_.k_examples, config_.seed,
                           {fnv1a64("stage2"), static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(gen_index)});
}

EpochRecord Engine::run_epoch(const PromptCandidate& incumbent, int epoch) {
    if (!incumbent.score.has_value())
        throw PreconditionError("incumbent must be scored before an epoch runs");

    const GatewayStats before = gateway_.stats();

    std::vector<PromptCandidate> variations =
        generate_variations(incumbent, config_.n_candidates, epoch, Stage::Variation);

    std::vector<PromptCandidate> embedded;
    embedded.reserve(variations.size());
    for (const PromptCandidate& v : variations)
        embedded.push_back(embed_examples(v, sample_stage2_examples(epoch, v.gen_index), epoch));

    std::vector<PromptCandidate> compressed;
    compressed.reserve(embedded.size());
    for (const PromptCandidate& e : embedded) compressed.push_back(compress(e, epoch));

    PromptCandidate distilled = aggregate(compressed, epoch);

    std::vector<PromptCandidate> finals =
        generate_variations(distilled, config_.n_candidates, epoch, Stage::FinalVariation);

    // Evaluate the Distilled candidate and the final variations; the incumbent
    // keeps its cached score and joins only the argmax.
    std::vector<ScoredCandidate> selection;
    selection.reserve(finals.size() + 2);
    selection.push_back({incumbent.id(), *incumbent.score, {}});

    EpochRecord record;
    record.epoch = epoch;
    record.incumbent_in = incumbent;

    auto evaluate = [&](PromptCandidate& candidate) {
        ScoredCandidate scored = score_candidate(candidate, eval_, task_, gateway_, config_);
        candidate.score = scored.score;
        record.scored.push_back({candidate.id(), scored.score});
        selection.push_back(std::move(scored));
    };
    evaluate(distilled);
    for (PromptCandidate& f : finals) evaluate(f);

    const std::size_t best = select_best_index(selection);
    if (best == 0) {
        record.incumbent_out = incumbent;
    } else if (best == 1) {
        record.incumbent_out = distilled;
    } else {
        record.incumbent_out = finals[best - 2];
    }

    record.stage_outputs[Stage::Variation] = std::move(variations);
    record.stage_outputs[Stage::ExampleEmbedded] = std::move(embedded);
    record.stage_outputs[Stage::Compressed] = std::move(compressed);
    record.stage_outputs[Stage::Distilled] = {std::move(distilled)};
    record.stage_outputs[Stage::FinalVariation] = std::move(finals);

    const GatewayStats after = gateway_.stats();
    record.llm_calls = after.backend_calls - before.backend_calls;
    record.cache_hits = after.cache_hits - before.cache_hits;
    return record;
}

OptimizationResult Engine::optimize(const EngineHooks& hooks,
                                    const std::optional<ResumeState>& resume) {
    if (auto violations = validate_config(config_, task_); !violations.empty())
        throw ConfigError(std::move(violations));
    if (train_.examples.empty()) throw PreconditionError("training set must be non-empty");

    SeedScoring seed;
    std::vector<EpochRecord> records;
    PromptCandidate incumbent;
    int start_epoch = 1;

    if (resume.has_value()) {
        seed = resume->seed;
        records = resume->completed;
        incumbent = records.empty() ? seed.seed : records.back().incumbent_out;
        start_epoch = static_cast<int>(records.size()) + 1;
    } else {
        const GatewayStats before = gateway_.stats();
        PromptCandidate candidate;
        candidate.text = task_.instruction_seed;
        candidate.epoch = 0;
        candidate.stage = Stage::Seed;
        candidate.gen_index = 0;
        candidate.score = score_candidate(candidate, eval_, task_, gateway_, config_).score;
        const GatewayStats after = gateway_.stats();
        seed = {candidate, static_cast<int>(eval_.size()),
                after.backend_calls - before.backend_calls,
                after.cache_hits - before.cache_hits};
        if (hooks.on_seed) hooks.on_seed(seed);
        incumbent = candidate;
    }

    for (int epoch = start_epoch; epoch <= config_.epochs; ++epoch) {
        if (hooks.stop_requested && hooks.stop_requested())
            throw RunInterrupted("stopped before epoch " + std::to_string(epoch));
        EpochRecord record = run_epoch(incumbent, epoch);
        incumbent = record.incumbent_out;
        records.push_back(std::move(record));
        if (hooks.on_epoch) hooks.on_epoch(records.back());
    }

    OptimizationResult result;
    result.best = incumbent;
    result.total_llm_calls = seed.llm_calls;
    result.total_cache_hits = seed.cache_hits;
    for (const EpochRecord& r : records) {
        result.total_llm_calls += r.llm_calls;
        result.total_cache_hits += r.cache_hits;
    }
    result.epochs = std::move(records);
    result.config_snapshot = config_;
    return result;
}

} // namespace distill
