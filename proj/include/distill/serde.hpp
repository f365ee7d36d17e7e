#pragma once

// JSON serialization for every persisted domain type, plus the run
// configuration document. All emitters produce objects whose keys dump in
// sorted order (the library's object representation is an ordered map), so
// serialized artifacts are byte-stable across runs and platforms.
//
// Conventions: optional fields serialize as null and accept null or a missing
// key when parsed; eval_subset_size serializes as the string "all" when
// unset. LlmRequest serializes only its cache-canonical fields (model,
// system, user, temperature, max_tokens, seed): purpose is telemetry and is
// deliberately dropped, so a parsed request carries the default purpose.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "distill/core.hpp"

namespace distill {

void to_json(nlohmann::json& j, const TaskSpec& v);
void from_json(const nlohmann::json& j, TaskSpec& v);

void to_json(nlohmann::json& j, const Example& v);
void from_json(const nlohmann::json& j, Example& v);

void to_json(nlohmann::json& j, const PromptCandidate& v);
void from_json(const nlohmann::json& j, PromptCandidate& v);

void to_json(nlohmann::json& j, const MetaPromptSet& v);
void from_json(const nlohmann::json& j, MetaPromptSet& v);

void to_json(nlohmann::json& j, const MockRule& v);
void from_json(const nlohmann::json& j, MockRule& v);

void to_json(nlohmann::json& j, const BackendConfig& v);
void from_json(const nlohmann::json& j, BackendConfig& v);

void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);

void to_json(nlohmann::json& j, const ScoredEntry& v);
void from_json(const nlohmann::json& j, ScoredEntry& v);

void to_json(nlohmann::json& j, const EpochRecord& v);
void from_json(const nlohmann::json& j, EpochRecord& v);

void to_json(nlohmann::json& j, const OptimizationResult& v);
void from_json(const nlohmann::json& j, OptimizationResult& v);

void to_json(nlohmann::json& j, const LlmRequest& v);
void from_json(const nlohmann::json& j, LlmRequest& v);

// The run configuration file: one JSON document holding the task description
// and the run parameters, e.g. {"task": {...}, "run": {...}}.
struct ConfigDocument {
    TaskSpec task;
    RunConfig run;

    bool operator==(const ConfigDocument&) const = default;
};

void to_json(nlohmann::json& j, const ConfigDocument& v);
void from_json(const nlohmann::json& j, ConfigDocument& v);

// Parses and structurally validates a configuration file. Unknown keys,
// missing required keys, wrong value types and unreadable files all throw
// ConfigError listing every problem found. Semantic validation
// (validate_config) is the caller's next step.
ConfigDocument load_config_document(const std::filesystem::path& path);

// Canonical textual form used for every JSON artifact this project writes:
// two-space indent, sorted keys, trailing newline.
std::string canonical_dump(const nlohmann::json& j);

// Writes atomically (temp file + rename) so a crash never leaves a torn file.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace distill
