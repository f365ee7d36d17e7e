#pragma once

// Run-directory persistence and report rendering. One self-contained
// directory per run:
//
//   runs/<run_id>/
//     lock                 writer lock, held while a process owns the run
//     manifest.json        identity, status, completed epoch count
//     config.json          the exact config document the run started from
//     seed.json            seed-prompt scoring (reused on resume)
//     epochs/epoch_<k>.json
//     evaluations.json     rows recorded by `evaluate --record`
//     cache/               gateway response cache
//     report.json          machine-readable results (no ids or timestamps,
//                          byte-identical for identical runs)
//     report.txt           aligned human-readable table

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/core.hpp"
#include "distill/engine.hpp"

namespace distill {

struct RunManifest {
    std::string run_id;
    std::string created_at; // ISO 8601 UTC
    std::string dataset_path; // where the training data was loaded from
    RunConfig config;
    TaskSpec task;
    enum class Status { Running, Completed, Failed };
    Status status = Status::Running;
    int completed_epochs = 0;

    bool operator==(const RunManifest&) const = default;
};

std::string to_string(RunManifest::Status status);
RunManifest::Status run_status_from_string(const std::string& s);

void to_json(nlohmann::json& j, const RunManifest& v);
void from_json(const nlohmann::json& j, RunManifest& v);
void to_json(nlohmann::json& j, const SeedScoring& v);
void from_json(const nlohmann::json& j, SeedScoring& v);

// One evaluation recorded into a run directory by `evaluate --record`.
// Few-shot records surface in the report table; zero-shot records are kept
// for inspection only.
struct EvaluationRecord {
    std::string mode; // "zero-shot" | "few-shot"
    int n_shots = 0;  // 0 for zero-shot
    double score = 0.0;
    int n_examples = 0;
    std::string prompt;

    bool operator==(const EvaluationRecord&) const = default;
};

void to_json(nlohmann::json& j, const EvaluationRecord& v);
void from_json(const nlohmann::json& j, EvaluationRecord& v);

struct ReportRow {
    std::string method;
    double score = 0.0;

    bool operator==(const ReportRow&) const = default;
};

// Everything the renderers need, assembled from persisted state only, so
// re-rendering a finished run never touches the backend or the dataset.
struct Report {
    std::string task_name;
    TaskKind kind = TaskKind::Classification;
    MetricKind metric = MetricKind::MacroF1;
    std::vector<ReportRow> rows;         // Baseline / Few shot / DistillPrompt
    std::vector<ScoredEntry> trajectory; // best candidate per epoch, in order
    std::string best_prompt;
    std::string best_id;
    double best_score = 0.0;
    int eval_examples = 0;
    std::int64_t total_llm_calls = 0;
    std::int64_t total_cache_hits = 0;

    bool operator==(const Report&) const = default;
};

Report build_report(const TaskSpec& task, const SeedScoring& seed,
                    const std::vector<EpochRecord>& epochs,
                    const std::vector<EvaluationRecord>& evaluations);

// Scores render to 4 decimals; columns are padded to the widest cell.
std::string render_report_text(const Report& report);

// Full precision, sorted keys; excludes run identity and timestamps so two
// identical runs serialize byte-identically.
nlohmann::json report_to_json(const Report& report);

// Writes report.json and report.txt into the run directory (atomic, no lock
// needed; safe for read-only report regeneration).
void write_report_files(const std::filesystem::path& run_dir, const Report& report);

class RunStore {
public:
    // Creates runs_root/<run_id>/, writes the initial manifest and the config
    // document, and takes the writer lock.
    static RunStore create(const std::filesystem::path& runs_root, const TaskSpec& task,
                           const RunConfig& config, const std::string& dataset_path);

    // Opens an existing run for writing (resume, evaluate --record).
    static RunStore open(const std::filesystem::path& run_dir);

    // Read-only accessors for cmd_report; no lock taken.
    static RunManifest read_manifest(const std::filesystem::path& run_dir);
    static SeedScoring read_seed(const std::filesystem::path& run_dir);
    static std::vector<EpochRecord> read_epochs(const std::filesystem::path& run_dir,
                                                int completed_epochs);
    static std::vector<EvaluationRecord> read_evaluations(const std::filesystem::path& run_dir);

    RunStore(RunStore&& other) noexcept;
    RunStore& operator=(RunStore&&) = delete;
    RunStore(const RunStore&) = delete;
    RunStore& operator=(const RunStore&) = delete;
    ~RunStore(); // releases the lock

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path cache_dir() const { return dir_ / "cache"; }
    const RunManifest& manifest() const { return manifest_; }

    void record_seed(const SeedScoring& seed);
    // Writes the epoch file first, then bumps completed_epochs in the
    // manifest, so the manifest never points at a missing file.
    void record_epoch(const EpochRecord& record);
    void finish(RunManifest::Status status);
    void append_evaluation(const EvaluationRecord& record);
    void write_report(const Report& report);

    SeedScoring load_seed() const { return read_seed(dir_); }
    std::vector<EpochRecord> load_epochs() const {
        return read_epochs(dir_, manifest_.completed_epochs);
    }

private:
    RunStore(std::filesystem::path dir, RunManifest manifest);
    void write_manifest();

    std::filesystem::path dir_;
    RunManifest manifest_;
    bool owns_lock_ = false;
};

} // namespace distill
