#pragma once

// Shared test helpers: independent oracles, random-instance generators and
// temp-directory management. Oracles here deliberately avoid every
// implementation path they are used to check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace testsupport {

// Brute-force macro F1: per class, a direct scan of all pairs. Classes with
// no tp/fp/fn evidence are excluded from the mean; absent or out-of-set
// predictions count against the gold class only.
inline double oracle_macro_f1(
    const std::vector<std::pair<std::optional<std::string>, std::string>>& pairs,
    const std::vector<std::string>& labels) {
    double sum = 0.0;
    int counted = 0;
    for (const auto& label : labels) {
        long tp = 0, fp = 0, fn = 0;
        for (const auto& [pred, gold] : pairs) {
            bool pred_known =
                pred && std::find(labels.begin(), labels.end(), *pred) != labels.end();
            bool pred_is = pred_known && *pred == label;
            bool gold_is = gold == label;
            if (pred_is && gold_is)
                ++tp;
            else if (pred_is)
                ++fp;
            else if (gold_is)
                ++fn;
        }
        if (tp + fp + fn == 0) continue;
        double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
        double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
        double f1 = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        sum += f1;
        ++counted;
    }
    return counted > 0 ? sum / counted : 0.0;
}

struct LabelInstance {
    std::vector<std::string> labels;
    std::vector<std::pair<std::optional<std::string>, std::string>> pairs;
};

inline LabelInstance random_label_instance(std::mt19937_64& gen, int max_classes = 6,
                                           int max_pairs = 50) {
    LabelInstance inst;
    int n_classes = 1 + int(gen() % std::uint64_t(max_classes));
    for (int i = 0; i < n_classes; ++i) inst.labels.push_back("c" + std::to_string(i));

    int n_pairs = 1 + int(gen() % std::uint64_t(max_pairs));
    for (int i = 0; i < n_pairs; ++i) {
        std::string gold = inst.labels[gen() % inst.labels.size()];
        std::optional<std::string> pred;
        switch (gen() % 10) {
            case 0: pred = std::nullopt; break;                  // unparseable
            case 1: pred = "junk-" + std::to_string(gen() % 3); break; // out-of-set text
            default: pred = inst.labels[gen() % inst.labels.size()]; break;
        }
        inst.pairs.emplace_back(pred, gold);
    }
    return inst;
}

inline std::vector<std::string> random_sentence(std::mt19937_64& gen, int max_len = 12,
                                                int vocab = 6) {
    int len = int(gen() % std::uint64_t(max_len + 1));
    std::vector<std::string> tokens;
    for (int i = 0; i < len; ++i)
        tokens.push_back(std::string(1, char('a' + int(gen() % std::uint64_t(vocab)))));
    return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "distill-test") {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto p = base / (tag + "-" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(p, ec)) {
                path_ = p;
                return;
            }
        }
        throw std::runtime_error("could not create temp directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace testsupport
