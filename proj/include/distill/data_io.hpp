#pragma once

// Dataset loading, validation and deterministic sampling. Datasets are
// JSON-Lines files of {"id": optional string, "input": string, "output":
// string} records; whitespace-only lines are skipped and line numbers in
// error messages are physical 1-based positions.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "distill/core.hpp"

namespace distill {

// Read-only after load; safe to share across threads.
struct Dataset {
    std::string task_name;
    std::vector<Example> examples;
    std::filesystem::path source_path;
};

// Parses and validates a JSON-Lines dataset against the task: records must
// carry string input/output (id optional, assigned "line-<n>" when missing),
// ids must be unique, and classification outputs must be members of the label
// set. Throws MalformedRecord, LabelOutsideTaskSet or EmptyDataset.
Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task);

// Deterministic sample of k distinct examples. The RNG stream is derived from
// the seed and stream_key, and selection is keyed on sorted example ids, so
// reordering the dataset file never changes which examples a given stream
// picks. Distinct stream keys give independent samples; identical keys give
// identical samples on every platform. Throws PreconditionError when
// k < 0 or k > |dataset|.
std::vector<Example> sample_examples(const Dataset& dataset, int k, std::int64_t seed,
                                     const std::vector<std::uint64_t>& stream_key);

// The evaluation subset, fixed once per run: nullopt ("all") returns every
// example in file order; a numeric size draws a deterministic sample and
// returns it in file order. Throws PreconditionError when size < 1 or
// size > |dataset|.
std::vector<Example> freeze_eval_subset(const Dataset& dataset, const std::optional<int>& size,
                                        std::int64_t seed);

} // namespace distill
