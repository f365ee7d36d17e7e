#include "distill/cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "distill/core.hpp"
#include "distill/data_io.hpp"
#include "distill/engine.hpp"
#include "distill/errors.hpp"
#include "distill/evaluator.hpp"
#include "distill/gateway.hpp"
#include "distill/rng.hpp"
#include "distill/run_store.hpp"
#include "distill/serde.hpp"
#include "distill/text.hpp"

namespace distill {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_sigint(int) { g_interrupted = 1; }

// Installs the handler for the optimization loop and restores the previous
// one on scope exit, so evaluate/report keep default interrupt behavior.
struct SigintScope {
    SigintScope() {
        g_interrupted = 0;
        previous = std::signal(SIGINT, on_sigint);
    }
    ~SigintScope() { std::signal(SIGINT, previous); }
    void (*previous)(int) = SIG_DFL;
};

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const RunInterrupted*>(&e)) return 3;
    if (dynamic_cast<const GatewayError*>(&e)) return 2;
    return 1;
}

BackendConfig backend_for_run(const RunConfig& config, const fs::path& cache_dir) {
    BackendConfig backend = config.backend;
    backend.cache_dir = cache_dir.string();
    return backend;
}

void print_best(const RunStore& store, const OptimizationResult& result) {
    std::cout << "Run directory: " << store.dir().string() << "\n";
    std::cout << "Best score: " << result.best.score.value_or(0.0) << "\n";
    std::cout << "Best prompt:\n" << result.best.text << "\n";
}

// Shared tail of optimize and resume: run the epochs with persistence hooks,
// then report and mark the run completed.
int drive_run(RunStore& store, Engine& engine, const std::optional<ResumeState>& resume,
              int stop_after) {
    std::optional<SeedScoring> seed;
    if (resume.has_value()) seed = resume->seed;

    EngineHooks hooks;
    hooks.on_seed = [&](const SeedScoring& s) {
        seed = s;
        store.record_seed(s);
    };
    hooks.on_epoch = [&](const EpochRecord& record) { store.record_epoch(record); };
    hooks.stop_requested = [&] {
        if (g_interrupted) return true;
        return stop_after > 0 && store.manifest().completed_epochs >= stop_after;
    };

    SigintScope sigint;
    try {
        const OptimizationResult result = engine.optimize(hooks, resume);
        store.write_report(build_report(engine.task(), *seed, result.epochs, {}));
        store.finish(RunManifest::Status::Completed);
        print_best(store, result);
        return 0;
    } catch (const RunInterrupted& e) {
        // manifest keeps status "running" with the completed prefix persisted
        std::cerr << "interrupted: " << e.what() << "\n";
        std::cerr << "resume with: distillprompt resume " << store.dir().string() << "\n";
        return 3;
    } catch (const std::exception& e) {
        store.finish(RunManifest::Status::Failed);
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int cmd_optimize(const std::string& config_path, const std::string& data_path,
                 const std::string& out_dir, int stop_after) {
    const ConfigDocument doc = load_config_document(config_path);
    if (auto violations = validate_config(doc.run, doc.task); !violations.empty())
        throw ConfigError(std::move(violations));
    Dataset dataset = load_dataset(data_path, doc.task);

    RunStore store = RunStore::create(out_dir, doc.task, doc.run,
                                      fs::absolute(data_path).string());
    const BackendConfig backend = backend_for_run(doc.run, store.cache_dir());
    Gateway gateway(make_backend(backend), backend);
    Engine engine(doc.task, std::move(dataset), doc.run, gateway);
    return drive_run(store, engine, std::nullopt, stop_after);
}

int cmd_resume(const std::string& run_dir, const std::string& data_override, int stop_after) {
    RunStore store = RunStore::open(run_dir);
    if (store.manifest().status == RunManifest::Status::Completed) {
        std::cerr << "error: run " << store.manifest().run_id << " is already completed\n";
        return 1;
    }

    const TaskSpec task = store.manifest().task;
    const RunConfig config = store.manifest().config;
    const std::string data_path =
        data_override.empty() ? store.manifest().dataset_path : data_override;
    Dataset dataset = load_dataset(data_path, task);

    ResumeState resume;
    resume.seed = store.load_seed();
    resume.completed = store.load_epochs();

    const BackendConfig backend = backend_for_run(config, store.cache_dir());
    Gateway gateway(make_backend(backend), backend);
    Engine engine(task, std::move(dataset), config, gateway);
    return drive_run(store, engine, resume, stop_after);
}

int cmd_evaluate(const std::string& config_path, const std::string& data_path,
                 const std::string& prompt_path, int few_shot, const std::string& record_dir) {
    const ConfigDocument doc = load_config_document(config_path);
    if (auto violations = validate_config(doc.run, doc.task); !violations.empty())
        throw ConfigError(std::move(violations));
    const Dataset dataset = load_dataset(data_path, doc.task);

    std::ifstream in(prompt_path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string prompt_text = trim(buffer.str());
    if (!in || prompt_text.empty())
        throw Error("prompt file is empty or unreadable: " + prompt_path);

    // Recording into a run directory locks it and reuses its response cache.
    std::optional<RunStore> store;
    BackendConfig backend = doc.run.backend;
    if (!record_dir.empty()) {
        store.emplace(RunStore::open(record_dir));
        backend.cache_dir = store->cache_dir().string();
    }
    Gateway gateway(make_backend(backend), backend);

    const std::vector<Example> eval =
        freeze_eval_subset(dataset, doc.run.eval_subset_size, doc.run.seed);

    PromptCandidate candidate;
    candidate.text = prompt_text;

    ScoredCandidate scored;
    if (few_shot > 0) {
        // one spare shot so every evaluated example finds a disjoint set
        const std::vector<Example> pool = sample_examples(
            dataset, few_shot + 1, doc.run.seed, {fnv1a64("few_shot")});
        scored = score_candidate_few_shot(candidate, eval, pool, few_shot, doc.task, gateway,
                                          doc.run);
    } else {
        scored = score_candidate(candidate, eval, doc.task, gateway, doc.run);
    }

    const std::string mode =
        few_shot > 0 ? "few-shot:" + std::to_string(few_shot) : "zero-shot";
    const json out{{"prompt", prompt_text},
                   {"mode", mode},
                   {"metric", to_string(doc.task.metric)},
                   {"score", scored.score},
                   {"n_examples", static_cast<int>(eval.size())}};
    std::cout << canonical_dump(out);

    if (store.has_value()) {
        EvaluationRecord record;
        record.mode = few_shot > 0 ? "few-shot" : "zero-shot";
        record.n_shots = few_shot;
        record.score = scored.score;
        record.n_examples = static_cast<int>(eval.size());
        record.prompt = prompt_text;
        store->append_evaluation(record);
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const RunManifest manifest = RunStore::read_manifest(run_dir);
    const SeedScoring seed = RunStore::read_seed(run_dir);
    const std::vector<EpochRecord> epochs =
        RunStore::read_epochs(run_dir, manifest.completed_epochs);
    const std::vector<EvaluationRecord> evaluations = RunStore::read_evaluations(run_dir);

    const Report report = build_report(manifest.task, seed, epochs, evaluations);
    write_report_files(run_dir, report);
    std::cout << render_report_text(report);
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"DistillPrompt: iterative prompt optimization and evaluation"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, prompt_path, run_dir, record_dir, data_override;
    int stop_after = 0;
    int few_shot = 0;

    CLI::App* optimize = app.add_subcommand("optimize", "Run the optimization loop");
    optimize->add_option("--config", config_path, "Config file (JSON)")->required();
    optimize->add_option("--data", data_path, "Training dataset (JSONL)")->required();
    optimize->add_option("--out", out_dir, "Directory to create the run under")->required();
    optimize->add_option("--stop-after", stop_after,
                         "Stop cleanly after this many completed epochs (exit 3, resumable)");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Score one prompt on a dataset");
    evaluate->add_option("--config", config_path, "Config file (JSON)")->required();
    evaluate->add_option("--data", data_path, "Dataset (JSONL)")->required();
    evaluate->add_option("--prompt", prompt_path, "File holding the prompt text")->required();
    evaluate->add_option("--few-shot", few_shot, "Prepend N demonstrations per example");
    evaluate->add_option("--record", record_dir,
                         "Run directory to record this evaluation into");

    CLI::App* report = app.add_subcommand("report", "Render report.txt and report.json");
    report->add_option("run_dir", run_dir, "Run directory")->required();

    CLI::App* resume = app.add_subcommand("resume", "Continue an interrupted run");
    resume->add_option("run_dir", run_dir, "Run directory")->required();
    resume->add_option("--data", data_override,
                       "Dataset path override (defaults to the recorded one)");
    resume->add_option("--stop-after", stop_after,
                       "Stop cleanly after this many completed epochs (exit 3, resumable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (optimize->parsed()) return cmd_optimize(config_path, data_path, out_dir, stop_after);
        if (evaluate->parsed())
            return cmd_evaluate(config_path, data_path, prompt_path, few_shot, record_dir);
        if (report->parsed()) return cmd_report(run_dir);
        if (resume->parsed()) return cmd_resume(run_dir, data_override, stop_after);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 1;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("distillprompt");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

} // namespace distill
