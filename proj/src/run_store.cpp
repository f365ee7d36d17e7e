#include "distill/run_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <utility>

#include "distill/errors.hpp"
#include "distill/serde.hpp"

namespace distill {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(RunManifest::Status status) {
    switch (status) {
        case RunManifest::Status::Running: return "running";
        case RunManifest::Status::Completed: return "completed";
        case RunManifest::Status::Failed: return "failed";
    }
    throw std::logic_error("unknown run status");
}

RunManifest::Status run_status_from_string(const std::string& s) {
    if (s == "running") return RunManifest::Status::Running;
    if (s == "completed") return RunManifest::Status::Completed;
    if (s == "failed") return RunManifest::Status::Failed;
    throw Error("unknown run status: " + s);
}

void to_json(json& j, const RunManifest& v) {
    j = json{{"run_id", v.run_id},
             {"created_at", v.created_at},
             {"dataset_path", v.dataset_path},
             {"config", v.config},
             {"task", v.task},
             {"status", to_string(v.status)},
             {"completed_epochs", v.completed_epochs}};
}

void from_json(const json& j, RunManifest& v) {
    j.at("run_id").get_to(v.run_id);
    j.at("created_at").get_to(v.created_at);
    j.at("dataset_path").get_to(v.dataset_path);
    v.config = j.at("config").get<RunConfig>();
    v.task = j.at("task").get<TaskSpec>();
    v.status = run_status_from_string(j.at("status").get<std::string>());
    j.at("completed_epochs").get_to(v.completed_epochs);
}

void to_json(json& j, const SeedScoring& v) {
    j = json{{"candidate", v.seed},
             {"eval_examples", v.eval_examples},
             {"llm_calls", v.llm_calls},
             {"cache_hits", v.cache_hits}};
}

void from_json(const json& j, SeedScoring& v) {
    v.seed = j.at("candidate").get<PromptCandidate>();
    j.at("eval_examples").get_to(v.eval_examples);
    j.at("llm_calls").get_to(v.llm_calls);
    j.at("cache_hits").get_to(v.cache_hits);
}

void to_json(json& j, const EvaluationRecord& v) {
    j = json{{"mode", v.mode},
             {"n_shots", v.n_shots},
             {"score", v.score},
             {"n_examples", v.n_examples},
             {"prompt", v.prompt}};
}

void from_json(const json& j, EvaluationRecord& v) {
    j.at("mode").get_to(v.mode);
    j.at("n_shots").get_to(v.n_shots);
    j.at("score").get_to(v.score);
    j.at("n_examples").get_to(v.n_examples);
    j.at("prompt").get_to(v.prompt);
}

namespace {

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string new_run_id() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    std::random_device rd;
    char suffix[8];
    std::snprintf(suffix, sizeof(suffix), "%04x", rd() & 0xFFFF);
    return std::string(stamp) + "-" + suffix;
}

void take_lock(const fs::path& dir) {
    const fs::path lock = dir / "lock";
    const int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw StoreError("run directory is locked: " + lock.string() +
                         " exists (remove it if no other process owns the run)");
    ::close(fd);
}

void release_lock(const fs::path& dir) noexcept {
    std::error_code ec;
    fs::remove(dir / "lock", ec);
}

void write_text_file(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw StoreError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string format_score(double score) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", score);
    return buf;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string kind_display(TaskKind kind) {
    return kind == TaskKind::Classification ? "classification" : "generation";
}

std::string metric_display(MetricKind metric) {
    return metric == MetricKind::MacroF1 ? "macro F1" : "METEOR";
}

} // namespace

// ── report assembly and rendering ────────────────────────────────

Report build_report(const TaskSpec& task, const SeedScoring& seed,
                    const std::vector<EpochRecord>& epochs,
                    const std::vector<EvaluationRecord>& evaluations) {
    Report report;
    report.task_name = task.name;
    report.kind = task.kind;
    report.metric = task.metric;
    report.eval_examples = seed.eval_examples;

    report.rows.push_back({"Baseline prompt", seed.seed.score.value_or(0.0)});
    for (const EvaluationRecord& e : evaluations)
        if (e.mode == "few-shot")
            report.rows.push_back({"Few shot: n = " + std::to_string(e.n_shots), e.score});

    report.total_llm_calls = seed.llm_calls;
    report.total_cache_hits = seed.cache_hits;
    for (const EpochRecord& r : epochs) {
        report.trajectory.push_back(
            {r.incumbent_out.id(), r.incumbent_out.score.value_or(0.0)});
        report.total_llm_calls += r.llm_calls;
        report.total_cache_hits += r.cache_hits;
    }

    const PromptCandidate& best = epochs.empty() ? seed.seed : epochs.back().incumbent_out;
    report.best_prompt = best.text;
    report.best_id = best.id();
    report.best_score = best.score.value_or(0.0);
    if (!epochs.empty()) report.rows.push_back({"DistillPrompt", report.best_score});
    return report;
}

std::string render_report_text(const Report& report) {
    std::string out;
    out += "Task: " + report.task_name + " (" + kind_display(report.kind) + ", " +
           metric_display(report.metric) + ")\n";
    out += "Evaluation examples: " + std::to_string(report.eval_examples) + "\n";
    out += "\n";

    std::size_t method_width = 6; // "Method"
    for (const ReportRow& row : report.rows)
        method_width = std::max(method_width, row.method.size());
    out += pad_right("Method", method_width) + "  " + pad_left("Score", 6) + "\n";
    out += std::string(method_width, '-') + "  " + std::string(6, '-') + "\n";
    for (const ReportRow& row : report.rows)
        out += pad_right(row.method, method_width) + "  " +
               pad_left(format_score(row.score), 6) + "\n";

    if (!report.trajectory.empty()) {
        std::size_t id_width = 14; // "Best candidate"
        for (const ScoredEntry& step : report.trajectory)
            id_width = std::max(id_width, step.id.size());
        out += "\n";
        out += pad_left("Epoch", 5) + "  " + pad_left("Best score", 10) + "  " +
               "Best candidate\n";
        out += std::string(5, '-') + "  " + std::string(10, '-') + "  " +
               std::string(id_width, '-') + "\n";
        for (std::size_t i = 0; i < report.trajectory.size(); ++i)
            out += pad_left(std::to_string(i + 1), 5) + "  " +
                   pad_left(format_score(report.trajectory[i].score), 10) + "  " +
                   report.trajectory[i].id + "\n";
    }

    out += "\n";
    out += "Best prompt (" + report.best_id + "):\n";
    out += report.best_prompt + "\n";
    return out;
}

json report_to_json(const Report& report) {
    json rows = json::array();
    for (const ReportRow& row : report.rows)
        rows.push_back({{"method", row.method}, {"score", row.score}});

    json trajectory = json::array();
    for (std::size_t i = 0; i < report.trajectory.size(); ++i)
        trajectory.push_back({{"epoch", static_cast<int>(i + 1)},
                              {"candidate_id", report.trajectory[i].id},
                              {"score", report.trajectory[i].score}});

    return json{{"task", report.task_name},
                {"kind", to_string(report.kind)},
                {"metric", to_string(report.metric)},
                {"eval_examples", report.eval_examples},
                {"rows", rows},
                {"trajectory", trajectory},
                {"best",
                 {{"candidate_id", report.best_id},
                  {"prompt", report.best_prompt},
                  {"score", report.best_score}}},
                {"total_llm_calls", report.total_llm_calls},
                {"total_cache_hits", report.total_cache_hits}};
}

// ── store ────────────────────────────────────────────────────────

RunStore::RunStore(fs::path dir, RunManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)), owns_lock_(true) {}

RunStore::RunStore(RunStore&& other) noexcept
    : dir_(std::move(other.dir_)),
      manifest_(std::move(other.manifest_)),
      owns_lock_(std::exchange(other.owns_lock_, false)) {}

RunStore::~RunStore() {
    if (owns_lock_) release_lock(dir_);
}

RunStore RunStore::create(const fs::path& runs_root, const TaskSpec& task,
                          const RunConfig& config, const std::string& dataset_path) {
    std::error_code ec;
    fs::create_directories(runs_root, ec);

    fs::path dir;
    std::string run_id;
    for (int attempt = 0;; ++attempt) {
        run_id = new_run_id();
        dir = runs_root / run_id;
        if (!fs::exists(dir)) break;
        if (attempt >= 16) throw StoreError("cannot allocate a fresh run id under " +
                                            runs_root.string());
    }
    fs::create_directories(dir / "epochs");
    fs::create_directories(dir / "cache");
    take_lock(dir);

    RunManifest manifest;
    manifest.run_id = run_id;
    manifest.created_at = utc_now();
    manifest.dataset_path = dataset_path;
    manifest.config = config;
    manifest.task = task;

    RunStore store(dir, manifest);
    store.write_manifest();
    write_json_file(dir / "config.json", json{{"task", task}, {"run", config}});
    return store;
}

RunStore RunStore::open(const fs::path& run_dir) {
    RunManifest manifest = read_manifest(run_dir);
    take_lock(run_dir);
    return RunStore(run_dir, std::move(manifest));
}

RunManifest RunStore::read_manifest(const fs::path& run_dir) {
    try {
        return read_json_file(run_dir / "manifest.json").get<RunManifest>();
    } catch (const std::exception& e) {
        throw StoreError("cannot read manifest in " + run_dir.string() + ": " + e.what());
    }
}

SeedScoring RunStore::read_seed(const fs::path& run_dir) {
    try {
        return read_json_file(run_dir / "seed.json").get<SeedScoring>();
    } catch (const std::exception& e) {
        throw StoreError("cannot read seed scoring in " + run_dir.string() + ": " + e.what());
    }
}

std::vector<EpochRecord> RunStore::read_epochs(const fs::path& run_dir, int completed_epochs) {
    std::vector<EpochRecord> out;
    out.reserve(static_cast<std::size_t>(std::max(completed_epochs, 0)));
    for (int k = 1; k <= completed_epochs; ++k) {
        const fs::path path = run_dir / "epochs" / ("epoch_" + std::to_string(k) + ".json");
        try {
            out.push_back(read_json_file(path).get<EpochRecord>());
        } catch (const std::exception& e) {
            throw StoreError("missing or corrupt epoch file " + path.string() + ": " + e.what());
        }
    }
    return out;
}

std::vector<EvaluationRecord> RunStore::read_evaluations(const fs::path& run_dir) {
    const fs::path path = run_dir / "evaluations.json";
    if (!fs::exists(path)) return {};
    try {
        return read_json_file(path).get<std::vector<EvaluationRecord>>();
    } catch (const std::exception& e) {
        throw StoreError("cannot read " + path.string() + ": " + e.what());
    }
}

void RunStore::write_manifest() {
    write_json_file(dir_ / "manifest.json", json(manifest_));
}

void RunStore::record_seed(const SeedScoring& seed) {
    write_json_file(dir_ / "seed.json", json(seed));
}

void RunStore::record_epoch(const EpochRecord& record) {
    if (record.epoch != manifest_.completed_epochs + 1)
        throw StoreError("epoch records must be appended in order: got epoch " +
                         std::to_string(record.epoch) + " after " +
                         std::to_string(manifest_.completed_epochs));
    write_json_file(dir_ / "epochs" / ("epoch_" + std::to_string(record.epoch) + ".json"),
                    json(record));
    manifest_.completed_epochs = record.epoch;
    write_manifest();
}

void RunStore::finish(RunManifest::Status status) {
    manifest_.status = status;
    write_manifest();
}

void RunStore::append_evaluation(const EvaluationRecord& record) {
    std::vector<EvaluationRecord> all = read_evaluations(dir_);
    all.push_back(record);
    write_json_file(dir_ / "evaluations.json", json(all));
}

void write_report_files(const fs::path& run_dir, const Report& report) {
    write_json_file(run_dir / "report.json", report_to_json(report));
    write_text_file(run_dir / "report.txt", render_report_text(report));
}

void RunStore::write_report(const Report& report) {
    write_report_files(dir_, report);
}

} // namespace distill
