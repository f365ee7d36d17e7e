#pragma once

// Pure task metrics: macro F1 for classification and single-reference METEOR
// (exact unigram matching, 9:1 recall weighting, fragmentation penalty) for
// generation. Everything here is deterministic and thread-safe.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace distill {

struct ClassCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

struct ConfusionStats {
    std::map<std::string, ClassCounts> per_class;
};

using LabelPair = std::pair<std::optional<std::string>, std::string>; // (predicted, gold)

// Per-class true/false positive and false negative counts. An absent or
// out-of-set prediction counts as a synthetic out-of-set class: it adds a
// false negative to the gold class and a false positive to no real class.
ConfusionStats confusion_stats(const std::vector<LabelPair>& pairs,
                               const std::vector<std::string>& labels);

// Unweighted mean of per-class F1. Classes with tp=fp=fn=0 carry no evidence
// in the sample and are excluded from the mean rather than being scored as
// vacuously perfect. Golds outside `labels` violate the contract.
double macro_f1(const std::vector<LabelPair>& pairs, const std::vector<std::string>& labels);

// Casefolds, splits on whitespace, strips leading/trailing punctuation per
// token and drops empties. No stemming, no synonym matching.
std::vector<std::string> tokenize(std::string_view text);

struct MeteorAlignment {
    int matches = 0; // m: matched unigram count (maximum cardinality)
    int candidate_len = 0;
    int reference_len = 0;
    int chunks = 0; // maximal runs contiguous in both strings; 0 iff m = 0
};

// Maximum-cardinality one-to-one matching between identical tokens, choosing
// among maximum matchings one that minimizes the chunk count. Inputs with
// m <= 12 are solved exactly; larger ones fall back to the greedy heuristic.
MeteorAlignment align_unigrams(const std::vector<std::string>& candidate_tokens,
                               const std::vector<std::string>& reference_tokens);

// Exact minimum-chunk search (branch and bound). Exposed for the differential
// test against the greedy path; cost grows quickly with m.
MeteorAlignment align_unigrams_exhaustive(const std::vector<std::string>& candidate_tokens,
                                          const std::vector<std::string>& reference_tokens);

// Greedy longest-common-run heuristic; matches the exhaustive result on small
// inputs (validated differentially) and scales to long texts.
MeteorAlignment align_unigrams_greedy(const std::vector<std::string>& candidate_tokens,
                                      const std::vector<std::string>& reference_tokens);

// Sentence METEOR: F_mean * (1 - penalty) with
//   P = m/|candidate|, R = m/|reference|, F_mean = 10PR/(R + 9P),
//   penalty = 0.5 * (chunks/m)^3; 0 when nothing matches.
double meteor(std::string_view candidate, std::string_view reference);

} // namespace distill
