#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include <json.hpp>

#include "distill/data_io.hpp"
#include "distill/errors.hpp"
#include "distill/rng.hpp"
#include "support.hpp"

using namespace distill;
using testsupport::TempDir;
using testsupport::write_file;

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

// 20 records with zero-padded ids so lexicographic id order equals file order.
std::string corpus_jsonl() {
    std::ostringstream out;
    for (int i = 1; i <= 20; ++i) {
        const char* label = (i % 2 == 0) ? "positive" : "negative";
        char id[8];
        std::snprintf(id, sizeof id, "ex-%02d", i);
        out << "{\"id\": \"" << id << "\", \"input\": \"review " << i << "\", \"output\": \""
            << label << "\"}\n";
    }
    return out.str();
}

std::vector<std::string> ids_of(const std::vector<Example>& examples) {
    std::vector<std::string> ids;
    ids.reserve(examples.size());
    for (const auto& ex : examples) ids.push_back(ex.id);
    return ids;
}

Dataset load_text(const TempDir& dir, const std::string& text, const TaskSpec& task,
                  const char* name = "data.jsonl") {
    const auto path = dir.path() / name;
    write_file(path, text);
    return load_dataset(path, task);
}

} // namespace

TEST_CASE("well-formed dataset loads in file order") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());
    REQUIRE(data.examples.size() == 20);
    CHECK(data.task_name == "toy-sentiment");
    CHECK(data.examples.front().id == "ex-01");
    CHECK(data.examples.front().input == "review 1");
    CHECK(data.examples.front().output == "negative");
    CHECK(data.examples.back().id == "ex-20");
}

TEST_CASE("missing ids fall back to physical line numbers") {
    TempDir dir;
    const std::string text =
        "{\"input\": \"a\", \"output\": \"positive\"}\n"
        "\n"
        "   \n"
        "{\"id\": null, \"input\": \"b\", \"output\": \"negative\"}\n";
    const Dataset data = load_text(dir, text, sentiment_task());
    REQUIRE(data.examples.size() == 2);
    CHECK(data.examples[0].id == "line-1");
    CHECK(data.examples[1].id == "line-4");
}

TEST_CASE("carriage returns are stripped before parsing") {
    TempDir dir;
    const std::string text = "{\"id\": \"r1\", \"input\": \"a\", \"output\": \"positive\"}\r\n";
    const Dataset data = load_text(dir, text, sentiment_task());
    REQUIRE(data.examples.size() == 1);
    CHECK(data.examples[0].output == "positive");
}

TEST_CASE("malformed records carry their line number") {
    TempDir dir;
    const std::string good = "{\"id\": \"r1\", \"input\": \"a\", \"output\": \"positive\"}\n";

    SUBCASE("invalid JSON") {
        try {
            load_text(dir, good + "{oops\n", sentiment_task());
            FAIL("expected MalformedRecord");
        } catch (const MalformedRecord& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("line 2: not valid JSON") != std::string::npos);
        }
    }
    SUBCASE("non-object record") {
        CHECK_THROWS_WITH_AS(load_text(dir, good + "[1, 2]\n", sentiment_task()),
                             doctest::Contains("line 2: record must be a JSON object"),
                             MalformedRecord);
    }
    SUBCASE("unknown field") {
        CHECK_THROWS_WITH_AS(
            load_text(dir,
                      "{\"id\": \"r1\", \"input\": \"a\", \"output\": \"positive\", "
                      "\"label\": \"x\"}\n",
                      sentiment_task()),
            doctest::Contains("line 1: unknown field \"label\""), MalformedRecord);
    }
    SUBCASE("missing output") {
        CHECK_THROWS_WITH_AS(load_text(dir, "{\"id\": \"r1\", \"input\": \"a\"}\n",
                                       sentiment_task()),
                             doctest::Contains("line 1: missing field \"output\""),
                             MalformedRecord);
    }
    SUBCASE("non-string input") {
        CHECK_THROWS_WITH_AS(
            load_text(dir, "{\"id\": \"r1\", \"input\": 3, \"output\": \"positive\"}\n",
                      sentiment_task()),
            doctest::Contains("line 1: input must be a string"), MalformedRecord);
    }
    SUBCASE("numeric id") {
        CHECK_THROWS_WITH_AS(
            load_text(dir, "{\"id\": 7, \"input\": \"a\", \"output\": \"positive\"}\n",
                      sentiment_task()),
            doctest::Contains("line 1: id must be a string"), MalformedRecord);
    }
    SUBCASE("empty id") {
        CHECK_THROWS_WITH_AS(
            load_text(dir, "{\"id\": \"\", \"input\": \"a\", \"output\": \"positive\"}\n",
                      sentiment_task()),
            doctest::Contains("line 1: id must be non-empty"), MalformedRecord);
    }
    SUBCASE("duplicate id reported at second occurrence") {
        try {
            load_text(dir, good + good, sentiment_task());
            FAIL("expected MalformedRecord");
        } catch (const MalformedRecord& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("duplicate id \"r1\"") != std::string::npos);
        }
    }
}

TEST_CASE("classification outputs must be task labels") {
    TempDir dir;
    const std::string text = "{\"id\": \"r1\", \"input\": \"a\", \"output\": \"meh\"}\n";
    CHECK_THROWS_WITH_AS(load_text(dir, text, sentiment_task()),
                         doctest::Contains("output \"meh\" is not one of the task labels"),
                         LabelOutsideTaskSet);

    // Generation tasks accept free-form outputs.
    const Dataset data = load_text(dir, text, summary_task(), "gen.jsonl");
    CHECK(data.examples[0].output == "meh");
}

TEST_CASE("empty and unreadable files are rejected") {
    TempDir dir;
    CHECK_THROWS_WITH_AS(load_text(dir, "\n  \n", sentiment_task()),
                         doctest::Contains("dataset is empty"), EmptyDataset);
    CHECK_THROWS_WITH_AS(load_dataset(dir.path() / "missing.jsonl", sentiment_task()),
                         doctest::Contains("cannot open dataset file"), DataError);
}

TEST_CASE("loading is a fixpoint under re-serialization") {
    TempDir dir;
    const Dataset first = load_text(dir, corpus_jsonl(), sentiment_task());

    std::ostringstream round;
    for (const Example& ex : first.examples)
        round << nlohmann::json{{"id", ex.id}, {"input", ex.input}, {"output", ex.output}}.dump()
              << "\n";
    const Dataset second = load_text(dir, round.str(), sentiment_task(), "round.jsonl");
    CHECK(second.examples == first.examples);
}

TEST_CASE("sampling is deterministic per seed and stream key") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());

    const auto a = sample_examples(data, 5, 42, {1, 0});
    const auto b = sample_examples(data, 5, 42, {1, 0});
    CHECK(ids_of(a) == ids_of(b));

    const auto other_key = sample_examples(data, 5, 42, {1, 1});
    const auto other_seed = sample_examples(data, 5, 43, {1, 0});
    CHECK(ids_of(a) != ids_of(other_key));
    CHECK(ids_of(a) != ids_of(other_seed));

    std::vector<std::string> sorted = ids_of(a);
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::unique(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("sample composition ignores file order") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());

    // Same records, reversed file.
    std::istringstream lines(corpus_jsonl());
    std::vector<std::string> rows;
    for (std::string row; std::getline(lines, row);) rows.push_back(row);
    std::reverse(rows.begin(), rows.end());
    std::string reversed;
    for (const auto& row : rows) reversed += row + "\n";
    const Dataset flipped = load_text(dir, reversed, sentiment_task(), "flipped.jsonl");

    for (std::uint64_t key = 0; key < 8; ++key)
        CHECK(ids_of(sample_examples(data, 7, 42, {key})) ==
              ids_of(sample_examples(flipped, 7, 42, {key})));
}

TEST_CASE("sample size bounds") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());
    CHECK(sample_examples(data, 0, 1, {0}).empty());
    CHECK(sample_examples(data, 20, 1, {0}).size() == 20);
    CHECK_THROWS_AS(sample_examples(data, -1, 1, {0}), PreconditionError);
    CHECK_THROWS_WITH_AS(sample_examples(data, 21, 1, {0}),
                         doctest::Contains("sample size 21 exceeds dataset size 20"),
                         PreconditionError);
}

TEST_CASE("full-size sample is a permutation of the dataset") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());
    auto ids = ids_of(sample_examples(data, 20, 7, {3}));
    std::sort(ids.begin(), ids.end());
    CHECK(ids == ids_of(data.examples));
}

// Frozen draws: any change here means existing run directories and cached
// evaluations silently describe different example sets.
TEST_CASE("pinned sample draws") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());
    CHECK(ids_of(sample_examples(data, 5, 42, {1, 0})) ==
          std::vector<std::string>{"ex-06", "ex-10", "ex-16", "ex-18", "ex-19"});
    CHECK(ids_of(sample_examples(data, 5, 42, {1, 1})) ==
          std::vector<std::string>{"ex-15", "ex-12", "ex-18", "ex-01", "ex-03"});
    CHECK(ids_of(sample_examples(data, 3, 0, {fnv1a64("few_shot")})) ==
          std::vector<std::string>{"ex-08", "ex-01", "ex-11"});
}

TEST_CASE("eval subset covers everything when size is absent") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());
    CHECK(ids_of(freeze_eval_subset(data, std::nullopt, 42)) == ids_of(data.examples));
}

TEST_CASE("numeric eval subset is a deterministic sample in file order") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());

    const auto subset = freeze_eval_subset(data, 8, 42);
    REQUIRE(subset.size() == 8);
    CHECK(ids_of(subset) == ids_of(freeze_eval_subset(data, 8, 42)));
    CHECK(ids_of(subset) != ids_of(freeze_eval_subset(data, 8, 7)));

    // File order: positions strictly increase.
    auto position = [&](const std::string& id) {
        for (std::size_t i = 0; i < data.examples.size(); ++i)
            if (data.examples[i].id == id) return i;
        return data.examples.size();
    };
    for (std::size_t i = 1; i < subset.size(); ++i)
        CHECK(position(subset[i - 1].id) < position(subset[i].id));

    // Matches the dedicated stream, reordered.
    auto raw = ids_of(sample_examples(data, 8, 42, {fnv1a64("eval_subset")}));
    auto frozen = ids_of(subset);
    std::sort(raw.begin(), raw.end());
    std::sort(frozen.begin(), frozen.end());
    CHECK(raw == frozen);
}

TEST_CASE("eval subset bounds") {
    TempDir dir;
    const Dataset data = load_text(dir, corpus_jsonl(), sentiment_task());
    CHECK(freeze_eval_subset(data, 20, 1).size() == 20);
    CHECK_THROWS_AS(freeze_eval_subset(data, 0, 1), PreconditionError);
    CHECK_THROWS_WITH_AS(freeze_eval_subset(data, 21, 1),
                         doctest::Contains("eval subset size 21 exceeds dataset size 20"),
                         PreconditionError);
}
