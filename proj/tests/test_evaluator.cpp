#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "distill/errors.hpp"
#include "distill/evaluator.hpp"
#include "distill/gateway.hpp"
#include "distill/metrics.hpp"
#include "support.hpp"

using namespace distill;

namespace {

TaskSpec sentiment_task() {
    TaskSpec task;
    task.name = "toy-sentiment";
    task.kind = TaskKind::Classification;
    task.labels = {"positive", "negative"};
    task.metric = MetricKind::MacroF1;
    task.instruction_seed = "Classify the sentiment of the review.";
    return task;
}

TaskSpec summary_task() {
    TaskSpec task;
    task.name = "toy-summaries";
    task.kind = TaskKind::Generation;
    task.metric = MetricKind::Meteor;
    task.instruction_seed = "Summarize the passage.";
    return task;
}

RunConfig mock_config() {
    RunConfig config;
    config.backend.kind = BackendKind::ScriptedMock;
    config.backend.retry_backoff_ms = 0;
    config.seed = 7;
    return config;
}

PromptCandidate seed_candidate(const TaskSpec& task) {
    PromptCandidate c;
    c.text = task.instruction_seed;
    c.epoch = 0;
    c.stage = Stage::Seed;
    c.gen_index = 0;
    return c;
}

Example example(const std::string& id, const std::string& input, const std::string& output) {
    return Example{id, input, output};
}

// Gateway whose answers come from an input → raw-response table.
struct TableRig {
    explicit TableRig(std::map<std::string, std::string> table)
        : mock(std::make_shared<ScriptedMockBackend>(std::vector<MockRule>{})),
          gateway(mock, BackendConfig{}) {
        mock->set_responder(
            [table = std::move(table)](const LlmRequest& r) -> std::optional<std::string> {
                if (auto it = table.find(r.user); it != table.end()) return it->second;
                return std::string("no table entry");
            });
    }
    std::shared_ptr<ScriptedMockBackend> mock;
    Gateway gateway;
};

} // namespace

// ── prompt construction ──────────────────────────────────────────

TEST_CASE("zero-shot classification prompts pin the label set") {
    const TaskSpec task = sentiment_task();
    const RunConfig config = mock_config();
    const PromptCandidate candidate = seed_candidate(task);
    const Example ex = example("e1", "Great movie!", "positive");

    const LlmRequest request = build_task_prompt(candidate, ex, task, config);
    REQUIRE(request.system.has_value());
    CHECK(*request.system ==
          "Classify the sentiment of the review.\n\n"
          "Answer with exactly one of: positive, negative.");
    CHECK(request.user == "Great movie!");
    CHECK(request.temperature == config.eval_temperature);
    CHECK(request.max_tokens == config.task_max_tokens);
    CHECK(request.seed == config.seed);
    CHECK(request.model == config.backend.model);
    CHECK(request.purpose == Purpose::TaskPrediction);
}

TEST_CASE("generation prompts carry the candidate text verbatim") {
    const TaskSpec task = summary_task();
    const LlmRequest request = build_task_prompt(seed_candidate(task),
                                                 example("e1", "Long passage.", "Short."), task,
                                                 mock_config());
    CHECK(*request.system == "Summarize the passage.");
    CHECK(request.user == "Long passage.");
}

TEST_CASE("few-shot prompts interleave demonstrations before the target") {
    const TaskSpec task = sentiment_task();
    const std::vector<Example> shots = {example("s1", "Loved it", "positive"),
                                        example("s2", "Hated it", "negative")};
    const LlmRequest request = build_task_prompt(seed_candidate(task),
                                                 example("e1", "Fine, I guess", "positive"), task,
                                                 mock_config(), shots);
    CHECK(request.user ==
          "Input: Loved it\nOutput: positive\n\n"
          "Input: Hated it\nOutput: negative\n\n"
          "Input: Fine, I guess\nOutput:");
}

TEST_CASE("demonstrations may not include the evaluated example") {
    const TaskSpec task = sentiment_task();
    const std::vector<Example> shots = {example("e1", "identical", "positive")};
    CHECK_THROWS_WITH_AS(build_task_prompt(seed_candidate(task),
                                           example("e1", "identical", "positive"), task,
                                           mock_config(), shots),
                         doctest::Contains("demonstration \"e1\" overlaps"), PreconditionError);
}

// ── label extraction ─────────────────────────────────────────────

TEST_CASE("label extraction cascades from exact match to first mention") {
    const std::vector<std::string> labels = {"positive", "negative"};

    SUBCASE("exact answers, case and edge punctuation aside") {
        CHECK(extract_label("positive", labels) == "positive");
        CHECK(extract_label("  Positive.\n", labels) == "positive");
        CHECK(extract_label("\"NEGATIVE!\"", labels) == "negative");
    }
    SUBCASE("earliest whole-word mention wins in prose") {
        CHECK(extract_label("The review is negative, definitely not positive.", labels) ==
              "negative");
        CHECK(extract_label("Sure! I'd call this one positive overall.", labels) == "positive");
    }
    SUBCASE("embedded occurrences do not count") {
        CHECK(extract_label("positively glowing", labels) == std::nullopt);
        CHECK(extract_label("unnegative", labels) == std::nullopt);
    }
    SUBCASE("undecidable output maps to no label") {
        CHECK(extract_label("I cannot tell.", labels) == std::nullopt);
        CHECK(extract_label("", labels) == std::nullopt);
        CHECK(extract_label("   \n\t", labels) == std::nullopt);
    }
    SUBCASE("position beats label-set order") {
        const std::vector<std::string> nli = {"entailment", "neutral", "contradiction"};
        CHECK(extract_label("Neutral or contradiction? Hard to say.", nli) == "neutral");
        CHECK(extract_label("contradiction, though neutral was close", nli) == "contradiction");
    }
    SUBCASE("multi-word labels match as phrases") {
        const std::vector<std::string> multi = {"very bad", "bad"};
        CHECK(extract_label("Overall: very bad.", multi) == "very bad");
        CHECK(extract_label("just bad", multi) == "bad");
    }
}

// ── scoring ──────────────────────────────────────────────────────

TEST_CASE("a candidate answering every gold label scores 1.0") {
    const TaskSpec task = sentiment_task();
    const std::vector<Example> eval_set = {
        example("e1", "great", "positive"),    example("e2", "awful", "negative"),
        example("e3", "loved it", "positive"), example("e4", "garbage", "negative"),
    };
    std::map<std::string, std::string> table;
    for (const auto& ex : eval_set) table[ex.input] = "The answer is " + ex.output + ".";
    TableRig rig(std::move(table));

    const ScoredCandidate scored =
        score_candidate(seed_candidate(task), eval_set, task, rig.gateway, mock_config());
    CHECK(scored.score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scored.candidate_id == "e0-seed-0");
    REQUIRE(scored.outcomes.size() == 4);
    CHECK(scored.outcomes[0].matched_label == "positive");
    CHECK(scored.outcomes[0].raw_output == "The answer is positive.");
    CHECK(scored.outcomes[0].example_id == "e1");
    CHECK(rig.mock->call_count(Purpose::TaskPrediction) == 4);
    CHECK(rig.mock->call_count(Purpose::MetaGeneration) == 0);
}

TEST_CASE("mixed errors score the hand-checked macro F1") {
    // positive: tp=2 fn=1 fp=0 -> F1 0.8; negative: tp=2 fn=1 fp=1 -> F1 2/3.
    // Macro mean = 11/15.
    const TaskSpec task = sentiment_task();
    const std::vector<Example> eval_set = {
        example("e1", "i1", "positive"), example("e2", "i2", "positive"),
        example("e3", "i3", "positive"), example("e4", "i4", "negative"),
        example("e5", "i5", "negative"), example("e6", "i6", "negative"),
    };
    TableRig rig({{"i1", "positive"},
                  {"i2", "positive"},
                  {"i3", "negative"}, // wrong class
                  {"i4", "negative"},
                  {"i5", "negative"},
                  {"i6", "no idea"}}); // unparseable

    const ScoredCandidate scored =
        score_candidate(seed_candidate(task), eval_set, task, rig.gateway, mock_config());
    CHECK(scored.score == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    CHECK(scored.outcomes[5].matched_label == std::nullopt);
    CHECK(scored.outcomes[5].extracted == "");

    // The score is a pure function of the recorded outcomes.
    std::vector<LabelPair> pairs;
    for (std::size_t i = 0; i < eval_set.size(); ++i)
        pairs.emplace_back(scored.outcomes[i].matched_label, eval_set[i].output);
    CHECK(scored.score == macro_f1(pairs, task.labels));
    CHECK(scored.score == testsupport::oracle_macro_f1(pairs, task.labels));
}

TEST_CASE("answering gold beats answering nothing") {
    const TaskSpec task = sentiment_task();
    const std::vector<Example> eval_set = {
        example("e1", "i1", "positive"), example("e2", "i2", "positive"),
        example("e3", "i3", "positive"), example("e4", "i4", "negative"),
        example("e5", "i5", "negative"), example("e6", "i6", "negative"),
    };
    std::map<std::string, std::string> base = {{"i1", "positive"}, {"i2", "positive"},
                                               {"i3", "negative"}, {"i4", "negative"},
                                               {"i5", "negative"}, {"i6", "???"}};
    TableRig silent(base);
    base["i6"] = "negative";
    TableRig spoken(std::move(base));

    const double with_gap =
        score_candidate(seed_candidate(task), eval_set, task, silent.gateway, mock_config()).score;
    const double filled =
        score_candidate(seed_candidate(task), eval_set, task, spoken.gateway, mock_config()).score;
    CHECK(filled > with_gap);
}

TEST_CASE("classification score ignores eval-set ordering") {
    const TaskSpec task = sentiment_task();
    std::vector<Example> eval_set;
    std::map<std::string, std::string> table;
    std::mt19937 gen(99);
    for (int i = 0; i < 12; ++i) {
        const std::string gold = (i % 2 == 0) ? "positive" : "negative";
        eval_set.push_back(example("e" + std::to_string(i), "in" + std::to_string(i), gold));
        table["in" + std::to_string(i)] =
            (gen() % 4 == 0) ? "mumble" : ((gen() % 3 == 0) ? "positive" : gold);
    }
    TableRig rig(table);
    const double straight =
        score_candidate(seed_candidate(task), eval_set, task, rig.gateway, mock_config()).score;

    std::shuffle(eval_set.begin(), eval_set.end(), gen);
    TableRig rig2(table);
    const double shuffled =
        score_candidate(seed_candidate(task), eval_set, task, rig2.gateway, mock_config()).score;
    CHECK(straight == shuffled);
}

TEST_CASE("generation scoring averages per-example METEOR") {
    const TaskSpec task = summary_task();
    const std::vector<Example> eval_set = {
        example("g1", "p1", "a b c"),       // echo: m=3, 1 - 0.5/27
        example("g2", "p2", "w x y z"),     // echo: m=4, 1 - 0.5/64
        example("g3", "p3", "one two"),     // miss entirely
    };
    TableRig rig({{"p1", "a b c"}, {"p2", "w x y z"}, {"p3", "completely unrelated text"}});

    const ScoredCandidate scored =
        score_candidate(seed_candidate(task), eval_set, task, rig.gateway, mock_config());
    const double expected = ((1.0 - 0.5 / 27.0) + (1.0 - 0.5 / 64.0) + 0.0) / 3.0;
    CHECK(scored.score == doctest::Approx(expected).epsilon(1e-12));
    CHECK(scored.outcomes[0].extracted == "a b c"); // raw text, no label parsing
}

TEST_CASE("scoring an empty eval set is a caller bug") {
    TableRig rig({});
    CHECK_THROWS_AS(score_candidate(seed_candidate(sentiment_task()), {}, sentiment_task(),
                                    rig.gateway, mock_config()),
                    PreconditionError);
}

// ── few-shot scoring ─────────────────────────────────────────────

TEST_CASE("few-shot scoring demonstrates from the pool, never the target") {
    const TaskSpec task = sentiment_task();
    const std::vector<Example> eval_set = {example("e1", "i1", "positive"),
                                           example("e2", "i2", "negative")};
    const std::vector<Example> pool = {example("e1", "i1", "positive"),
                                       example("p1", "d1", "negative"),
                                       example("p2", "d2", "positive"),
                                       example("p3", "d3", "negative")};

    auto mock = std::make_shared<ScriptedMockBackend>(std::vector<MockRule>{});
    mock->set_responder([&](const LlmRequest& r) -> std::optional<std::string> {
        // Answer for the trailing target, not the demonstrations above it.
        const std::size_t target = r.user.rfind("Input: ");
        return r.user.compare(target, 10, "Input: i1\n") == 0 ? "positive" : "negative";
    });
    Gateway gateway(mock, BackendConfig{});

    const ScoredCandidate scored = score_candidate_few_shot(
        seed_candidate(task), eval_set, pool, 3, task, gateway, mock_config());
    CHECK(scored.score == doctest::Approx(1.0));

    const auto captured = mock->captured_requests();
    REQUIRE(captured.size() == 2);
    // e1 skips itself: demonstrations are p1, p2, p3. e2 takes the first three.
    CHECK(captured[0].user ==
          "Input: d1\nOutput: negative\n\n"
          "Input: d2\nOutput: positive\n\n"
          "Input: d3\nOutput: negative\n\n"
          "Input: i1\nOutput:");
    CHECK(captured[1].user.find("Input: i1\nOutput: positive") != std::string::npos);
    CHECK(captured[1].user.find("Input: d3") == std::string::npos);
}

TEST_CASE("few-shot preconditions") {
    const TaskSpec task = sentiment_task();
    const std::vector<Example> eval_set = {example("e1", "i1", "positive")};
    TableRig rig({});

    CHECK_THROWS_AS(score_candidate_few_shot(seed_candidate(task), eval_set,
                                             {example("p1", "d1", "negative")}, 0, task,
                                             rig.gateway, mock_config()),
                    PreconditionError);
    CHECK_THROWS_AS(score_candidate_few_shot(seed_candidate(task), eval_set,
                                             {example("p1", "d1", "negative")}, 2, task,
                                             rig.gateway, mock_config()),
                    PreconditionError);
    // Pool looks large enough but collapses once the target is excluded.
    CHECK_THROWS_WITH_AS(score_candidate_few_shot(seed_candidate(task), eval_set,
                                                  {example("e1", "i1", "positive"),
                                                   example("p1", "d1", "negative")},
                                                  2, task, rig.gateway, mock_config()),
                         doctest::Contains("disjoint demonstrations"), PreconditionError);
}

// ── selection ────────────────────────────────────────────────────

TEST_CASE("selection is argmax with earliest-lineage tie-break") {
    auto scored = [](const std::string& id, double score) {
        ScoredCandidate c;
        c.candidate_id = id;
        c.score = score;
        return c;
    };

    SUBCASE("unique maximum wins wherever it sits") {
        const std::vector<ScoredCandidate> pool = {
            scored("e1-distilled-0", 0.61), scored("e1-final_variation-0", 0.72),
            scored("e1-final_variation-1", 0.55), scored("e0-seed-0", 0.70)};
        CHECK(select_best_index(pool) == 1);
        CHECK(select_best(pool).candidate_id == "e1-final_variation-0");
    }
    SUBCASE("ties keep the incumbent") {
        const std::vector<ScoredCandidate> pool = {scored("e2-distilled-0", 0.7),
                                                   scored("e0-seed-0", 0.7),
                                                   scored("e2-final_variation-1", 0.7)};
        CHECK(select_best(pool).candidate_id == "e0-seed-0");
    }
    SUBCASE("within an epoch, earlier stage then smaller index") {
        const std::vector<ScoredCandidate> pool = {scored("e1-final_variation-3", 0.5),
                                                   scored("e1-final_variation-1", 0.5),
                                                   scored("e1-distilled-0", 0.5)};
        CHECK(select_best(pool).candidate_id == "e1-distilled-0");
    }
    SUBCASE("singleton and empty pools") {
        CHECK(select_best_index({scored("e0-seed-0", 0.0)}) == 0);
        CHECK_THROWS_AS(select_best_index({}), PreconditionError);
    }
    SUBCASE("pool order never changes the winner") {
        std::vector<ScoredCandidate> pool = {
            scored("e0-seed-0", 0.4), scored("e1-distilled-0", 0.8),
            scored("e1-final_variation-0", 0.8), scored("e1-final_variation-2", 0.3)};
        std::mt19937 gen(5);
        for (int round = 0; round < 20; ++round) {
            std::shuffle(pool.begin(), pool.end(), gen);
            CHECK(select_best(pool).candidate_id == "e1-distilled-0");
        }
    }
}
