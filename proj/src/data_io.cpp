#include "distill/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "distill/errors.hpp"
#include "distill/rng.hpp"
#include "distill/text.hpp"

namespace distill {

using nlohmann::json;

namespace {

Example parse_record(const std::string& line, long line_no, const TaskSpec& task) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw MalformedRecord("line " + std::to_string(line_no) + ": not valid JSON: " + e.what(),
                              line_no);
    }
    if (!j.is_object())
        throw MalformedRecord("line " + std::to_string(line_no) + ": record must be a JSON object",
                              line_no);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "id" && key != "input" && key != "output")
            throw MalformedRecord(
                "line " + std::to_string(line_no) + ": unknown field \"" + key + "\"", line_no);
    }

    Example ex;
    if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
        if (!it->is_string())
            throw MalformedRecord("line " + std::to_string(line_no) + ": id must be a string",
                                  line_no);
        ex.id = it->get<std::string>();
        if (ex.id.empty())
            throw MalformedRecord("line " + std::to_string(line_no) + ": id must be non-empty",
                                  line_no);
    } else {
        ex.id = "line-" + std::to_string(line_no);
    }

    for (const char* field : {"input", "output"}) {
        auto it = j.find(field);
        if (it == j.end())
            throw MalformedRecord(
                "line " + std::to_string(line_no) + ": missing field \"" + field + "\"", line_no);
        if (!it->is_string())
            throw MalformedRecord(
                "line " + std::to_string(line_no) + ": " + field + " must be a string", line_no);
    }
    ex.input = j.at("input").get<std::string>();
    ex.output = j.at("output").get<std::string>();

    if (task.kind == TaskKind::Classification) {
        if (std::find(task.labels.begin(), task.labels.end(), ex.output) == task.labels.end())
            throw LabelOutsideTaskSet("line " + std::to_string(line_no) + ": output \"" +
                                          ex.output + "\" is not one of the task labels",
                                      line_no);
    }
    return ex;
}

} // namespace

Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path.string());

    Dataset dataset;
    dataset.task_name = task.name;
    dataset.source_path = path;

    std::unordered_set<std::string> seen_ids;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        Example ex = parse_record(line, line_no, task);
        if (!seen_ids.insert(ex.id).second)
            throw MalformedRecord(
                "line " + std::to_string(line_no) + ": duplicate id \"" + ex.id + "\"", line_no);
        dataset.examples.push_back(std::move(ex));
    }
    if (dataset.examples.empty())
        throw EmptyDataset("dataset is empty: " + path.string());
    return dataset;
}

std::vector<Example> sample_examples(const Dataset& dataset, int k, std::int64_t seed,
                                     const std::vector<std::uint64_t>& stream_key) {
    const int n = static_cast<int>(dataset.examples.size());
    if (k < 0) throw PreconditionError("sample size must be ≥ 0");
    if (k > n)
        throw PreconditionError("sample size " + std::to_string(k) + " exceeds dataset size " +
                                std::to_string(n));

    // Key selection on the id ordering, not file positions, so reshuffling
    // the file cannot silently change experiment composition.
    std::vector<int> order(dataset.examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return dataset.examples[a].id < dataset.examples[b].id;
    });

    SeedStream stream(derive_seed(static_cast<std::uint64_t>(seed), stream_key));
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(stream.below(static_cast<std::uint64_t>(n - i)));
        std::swap(order[i], order[j]);
        out.push_back(dataset.examples[order[i]]);
    }
    return out;
}

std::vector<Example> freeze_eval_subset(const Dataset& dataset, const std::optional<int>& size,
                                        std::int64_t seed) {
    if (!size) return dataset.examples;
    if (*size < 1) throw PreconditionError("eval subset size must be ≥ 1");
    const int n = static_cast<int>(dataset.examples.size());
    if (*size > n)
        throw PreconditionError("eval subset size " + std::to_string(*size) +
                                " exceeds dataset size " + std::to_string(n));

    auto sampled = sample_examples(dataset, *size, seed, {fnv1a64("eval_subset")});

    // Emit in file order so evaluation batches and reports read naturally.
    std::unordered_set<std::string> chosen;
    for (const auto& ex : sampled) chosen.insert(ex.id);
    std::vector<Example> out;
    out.reserve(sampled.size());
    for (const auto& ex : dataset.examples)
        if (chosen.count(ex.id)) out.push_back(ex);
    return out;
}

} // namespace distill
