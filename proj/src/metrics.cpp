#include "distill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "distill/errors.hpp"
#include "distill/text.hpp"

namespace distill {

ConfusionStats confusion_stats(const std::vector<LabelPair>& pairs,
                               const std::vector<std::string>& labels) {
    ConfusionStats stats;
    for (const auto& label : labels) stats.per_class[label];

    for (const auto& [pred, gold] : pairs) {
        auto gold_it = stats.per_class.find(gold);
        if (gold_it == stats.per_class.end())
            throw PreconditionError("gold label outside label set: " + gold);

        bool pred_in_set = pred && stats.per_class.count(*pred) > 0;
        if (pred_in_set && *pred == gold) {
            gold_it->second.tp += 1;
        } else {
            gold_it->second.fn += 1;
            if (pred_in_set) stats.per_class[*pred].fp += 1;
        }
    }
    return stats;
}

double macro_f1(const std::vector<LabelPair>& pairs, const std::vector<std::string>& labels) {
    ConfusionStats stats = confusion_stats(pairs, labels);

    double sum = 0.0;
    int counted = 0;
    for (const auto& label : labels) {
        const ClassCounts& c = stats.per_class.at(label);
        if (c.tp + c.fp + c.fn == 0) continue; // no evidence for this class in the sample
        double precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
        double recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
        double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                               : 0.0;
        sum += f1;
        counted += 1;
    }
    return counted > 0 ? sum / counted : 0.0;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) {
            std::string tok = strip_punct_edges(lower_ascii(text.substr(start, i - start)));
            if (!tok.empty()) tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

namespace {

// Matched (candidate, reference) position pair.
struct MatchPair {
    int cand;
    int ref;
};

int count_chunks(std::vector<MatchPair> pairs) {
    if (pairs.empty()) return 0;
    std::sort(pairs.begin(), pairs.end(),
              [](const MatchPair& a, const MatchPair& b) { return a.cand < b.cand; });
    int chunks = 1;
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        bool extends = pairs[i].cand == pairs[i - 1].cand + 1 && pairs[i].ref == pairs[i - 1].ref + 1;
        if (!extends) ++chunks;
    }
    return chunks;
}

// Interns tokens so position comparisons are integer comparisons.
struct InternedPair {
    std::vector<int> cand;
    std::vector<int> ref;
    int max_matches = 0; // sum over shared tokens of min(count_cand, count_ref)
};

InternedPair intern(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    InternedPair out;
    std::unordered_map<std::string, int> ids;
    auto id_of = [&](const std::string& tok) {
        auto [it, _] = ids.try_emplace(tok, static_cast<int>(ids.size()));
        return it->second;
    };
    out.cand.reserve(cand.size());
    out.ref.reserve(ref.size());
    for (const auto& t : cand) out.cand.push_back(id_of(t));
    for (const auto& t : ref) out.ref.push_back(id_of(t));

    std::unordered_map<int, int> cand_counts, ref_counts;
    for (int t : out.cand) cand_counts[t] += 1;
    for (int t : out.ref) ref_counts[t] += 1;
    for (const auto& [tok, n] : cand_counts) {
        auto it = ref_counts.find(tok);
        if (it != ref_counts.end()) out.max_matches += std::min(n, it->second);
    }
    return out;
}

// Longest-run-first matching with bounded backtracking. The first descent is
// the classic greedy (repeatedly take the longest remaining run); the rest of
// a fixed compute budget funds depth-first backtracking over alternative run
// placements, because committing to one placement can strand positions that a
// different placement would have left for a neighbouring run. Small inputs
// are fully searched before the budget runs out; large ones degrade toward
// the plain greedy answer. Matching never stops while an identical unused
// pair remains, so every completed path has maximum cardinality.
struct RunSite {
    int cand;
    int ref;
    int len;
    bool truncated;
};

// Work budget in position-pair scans. One search node costs about
// |candidate| x |reference| scans, so the node allowance adapts to input
// size while total work stays bounded.
constexpr long kGreedyWorkBudget = 8'000'000;
constexpr long kGreedyMinNodes = 16;
// Below this area the move set also includes truncated runs and the
// backtracking is effectively exhaustive; above it, only whole maximal runs
// are explored (the extra precision stops mattering once m is large, because
// the chunk penalty is cubed in chunks/m).
constexpr long kGreedyFineArea = 4096;
constexpr std::size_t kGreedySiteCap = 4096;

struct RunSearch {
    const InternedPair& in;
    std::vector<char> used_c;
    std::vector<char> used_r;
    std::vector<MatchPair> pairs;
    bool fine;
    int runs = 0;
    long nodes_left = 0;
    int best_chunks = 0;
    std::vector<MatchPair> best_pairs;
    std::unordered_map<std::uint64_t, int> seen; // position-mask fingerprint -> fewest runs

    explicit RunSearch(const InternedPair& interned)
        : in(interned),
          used_c(interned.cand.size(), 0),
          used_r(interned.ref.size(), 0),
          fine(static_cast<long>(interned.cand.size()) *
                   static_cast<long>(interned.ref.size()) <=
               kGreedyFineArea) {}

    // The longest maximal run over unused positions (earliest candidate
    // position, then earliest reference position, on ties). len 0 when no
    // identical unused pair remains.
    RunSite longest_site() const {
        const auto& cand = in.cand;
        const auto& ref = in.ref;
        const int n = static_cast<int>(cand.size());
        const int r = static_cast<int>(ref.size());
        RunSite best{0, 0, 0, false};
        for (int i = 0; i < n; ++i) {
            if (used_c[i]) continue;
            for (int j = 0; j < r; ++j) {
                if (used_r[j] || cand[i] != ref[j]) continue;
                if (i > 0 && j > 0 && !used_c[i - 1] && !used_r[j - 1] &&
                    cand[i - 1] == ref[j - 1]) {
                    continue;
                }
                int len = 1;
                while (i + len < n && j + len < r && !used_c[i + len] && !used_r[j + len] &&
                       cand[i + len] == ref[j + len]) {
                    ++len;
                }
                if (len > best.len) best = {i, j, len, false};
            }
        }
        return best;
    }

    // Moves available at this node: every maximal run (not extendable on
    // either side given the used positions), longest first. On fine-grained
    // inputs each run's proper prefixes and suffixes join the move set: the
    // truncated forms matter when the best partition's runs block one
    // another's extensions in a cycle, so no ordering makes them all maximal.
    std::vector<RunSite> run_sites() const {
        const auto& cand = in.cand;
        const auto& ref = in.ref;
        const int n = static_cast<int>(cand.size());
        const int r = static_cast<int>(ref.size());
        std::vector<RunSite> sites;
        for (int i = 0; i < n; ++i) {
            if (used_c[i]) continue;
            for (int j = 0; j < r; ++j) {
                if (used_r[j] || cand[i] != ref[j]) continue;
                if (i > 0 && j > 0 && !used_c[i - 1] && !used_r[j - 1] &&
                    cand[i - 1] == ref[j - 1]) {
                    continue; // interior of the run starting one step back
                }
                int len = 1;
                while (i + len < n && j + len < r && !used_c[i + len] && !used_r[j + len] &&
                       cand[i + len] == ref[j + len]) {
                    ++len;
                }
                sites.push_back({i, j, len, false});
                if (!fine) continue;
                for (int l = 1; l < len; ++l) {
                    sites.push_back({i, j, l, true});                     // prefix
                    sites.push_back({i + len - l, j + len - l, l, true}); // suffix
                }
            }
        }
        std::sort(sites.begin(), sites.end(), [](const RunSite& a, const RunSite& b) {
            if (a.len != b.len) return a.len > b.len;
            if (a.truncated != b.truncated) return !a.truncated;
            if (a.cand != b.cand) return a.cand < b.cand;
            return a.ref < b.ref;
        });
        if (sites.size() > kGreedySiteCap) sites.resize(kGreedySiteCap);
        return sites;
    }

    void apply(const RunSite& site) {
        for (int k = 0; k < site.len; ++k) {
            used_c[site.cand + k] = 1;
            used_r[site.ref + k] = 1;
            pairs.push_back({site.cand + k, site.ref + k});
        }
        runs += 1;
    }

    void undo(const RunSite& site) {
        for (int k = 0; k < site.len; ++k) {
            used_c[site.cand + k] = 0;
            used_r[site.ref + k] = 0;
        }
        pairs.resize(pairs.size() - static_cast<std::size_t>(site.len));
        runs -= 1;
    }

    std::uint64_t fingerprint() const {
        std::uint64_t h = 14695981039346656037ULL;
        auto mix = [&h](const std::vector<char>& mask) {
            for (char c : mask) {
                h ^= static_cast<unsigned char>(c);
                h *= 1099511628211ULL;
            }
        };
        mix(used_c);
        mix(used_r);
        return h;
    }

    void dfs() {
        auto sites = run_sites();
        if (sites.empty()) {
            int chunks = count_chunks(pairs);
            if (chunks < best_chunks) {
                best_chunks = chunks;
                best_pairs = pairs;
            }
            return;
        }
        // Optimistic completion: pack the remaining matches into the longest
        // available whole runs, ignoring that they overlap. Overlap only
        // means the true number of future runs is higher, so pruning on this
        // count is safe.
        const int rem = in.max_matches - static_cast<int>(pairs.size());
        int packed = 0, future_runs = 0;
        for (const RunSite& site : sites) {
            if (site.truncated) continue;
            packed += site.len;
            ++future_runs;
            if (packed >= rem) break;
        }
        if (runs + future_runs >= best_chunks) return;
        for (const RunSite& site : sites) {
            if (nodes_left <= 0) return;
            apply(site);
            auto [it, inserted] = seen.emplace(fingerprint(), runs);
            if (inserted || runs < it->second) {
                it->second = runs;
                --nodes_left;
                dfs();
            }
            undo(site);
        }
    }
};

std::vector<MatchPair> greedy_match(const InternedPair& in) {
    RunSearch search(in);

    // Classic greedy: always take the longest remaining run. This seeds the
    // incumbent the backtracking search has to beat.
    for (;;) {
        RunSite site = search.longest_site();
        if (site.len == 0) break;
        search.apply(site);
    }
    search.best_chunks = count_chunks(search.pairs);
    search.best_pairs = search.pairs;

    const long area = static_cast<long>(in.cand.size()) * static_cast<long>(in.ref.size());
    const long nodes = kGreedyWorkBudget / std::max(1L, area);
    if (nodes >= kGreedyMinNodes) {
        search.used_c.assign(search.used_c.size(), 0);
        search.used_r.assign(search.used_r.size(), 0);
        search.pairs.clear();
        search.runs = 0;
        search.nodes_left = nodes;
        search.dfs();
    }
    return search.best_pairs;
}

struct ExhaustiveState {
    const std::vector<int>& cand;
    const std::vector<int>& ref;
    std::vector<char> used_r;
    std::unordered_map<int, int> remaining_need;  // token -> matches still required
    std::unordered_map<int, int> cand_left;       // token -> candidate occurrences at or after i
    std::vector<std::vector<int>> ref_positions_by_token;
    int total_needed = 0;
    int best = 0;
};

void exhaustive_dfs(ExhaustiveState& st, int i, int matched, int chunks, int last_c, int last_r) {
    if (chunks >= st.best) return; // chunk count only grows from here
    if (matched == st.total_needed) {
        st.best = chunks;
        return;
    }
    if (i >= static_cast<int>(st.cand.size())) return;

    int tok = st.cand[i];
    auto need_it = st.remaining_need.find(tok);
    int need = need_it == st.remaining_need.end() ? 0 : need_it->second;

    if (need > 0) {
        for (int j : st.ref_positions_by_token[tok]) {
            if (st.used_r[j]) continue;
            st.used_r[j] = 1;
            need_it->second -= 1;
            st.cand_left[tok] -= 1;
            int next_chunks = chunks + ((last_c == i - 1 && last_r == j - 1) ? 0 : 1);
            exhaustive_dfs(st, i + 1, matched + 1, next_chunks, i, j);
            st.cand_left[tok] += 1;
            need_it->second += 1;
            st.used_r[j] = 0;
        }
    }

    // Skipping position i is only allowed when the remaining candidate
    // occurrences of this token can still satisfy its match quota.
    int left_after = (st.cand_left.count(tok) ? st.cand_left[tok] : 0) - 1;
    if (left_after >= need) {
        if (st.cand_left.count(tok)) st.cand_left[tok] -= 1;
        exhaustive_dfs(st, i + 1, matched, chunks, last_c, last_r);
        if (st.cand_left.count(tok)) st.cand_left[tok] += 1;
    }
}

MeteorAlignment finish(const InternedPair& in, int chunks) {
    MeteorAlignment a;
    a.matches = in.max_matches;
    a.candidate_len = static_cast<int>(in.cand.size());
    a.reference_len = static_cast<int>(in.ref.size());
    a.chunks = chunks;
    return a;
}

} // namespace

MeteorAlignment align_unigrams_greedy(const std::vector<std::string>& candidate_tokens,
                                      const std::vector<std::string>& reference_tokens) {
    InternedPair in = intern(candidate_tokens, reference_tokens);
    if (in.max_matches == 0) return finish(in, 0);
    return finish(in, count_chunks(greedy_match(in)));
}

MeteorAlignment align_unigrams_exhaustive(const std::vector<std::string>& candidate_tokens,
                                          const std::vector<std::string>& reference_tokens) {
    InternedPair in = intern(candidate_tokens, reference_tokens);
    if (in.max_matches == 0) return finish(in, 0);

    // Seed the bound with the greedy solution; the search can only improve it.
    int greedy_chunks = count_chunks(greedy_match(in));

    int max_token = 0;
    for (int t : in.cand) max_token = std::max(max_token, t);
    for (int t : in.ref) max_token = std::max(max_token, t);

    ExhaustiveState st{in.cand, in.ref, std::vector<char>(in.ref.size(), 0), {}, {}, {}, 0, 0};
    st.ref_positions_by_token.resize(max_token + 1);
    for (int j = 0; j < static_cast<int>(in.ref.size()); ++j)
        st.ref_positions_by_token[in.ref[j]].push_back(j);

    std::unordered_map<int, int> cand_counts, ref_counts;
    for (int t : in.cand) cand_counts[t] += 1;
    for (int t : in.ref) ref_counts[t] += 1;
    for (const auto& [tok, n] : cand_counts) {
        auto it = ref_counts.find(tok);
        if (it != ref_counts.end()) st.remaining_need[tok] = std::min(n, it->second);
    }
    st.cand_left = cand_counts;
    st.total_needed = in.max_matches;
    st.best = greedy_chunks;

    exhaustive_dfs(st, 0, 0, 0, -2, -2);
    return finish(in, st.best);
}

MeteorAlignment align_unigrams(const std::vector<std::string>& candidate_tokens,
                               const std::vector<std::string>& reference_tokens) {
    InternedPair in = intern(candidate_tokens, reference_tokens);
    if (in.max_matches <= 12) return align_unigrams_exhaustive(candidate_tokens, reference_tokens);
    return align_unigrams_greedy(candidate_tokens, reference_tokens);
}

double meteor(std::string_view candidate, std::string_view reference) {
    std::vector<std::string> cand_tokens = tokenize(candidate);
    std::vector<std::string> ref_tokens = tokenize(reference);
    MeteorAlignment a = align_unigrams(cand_tokens, ref_tokens);
    if (a.matches == 0) return 0.0;

    double m = a.matches;
    double precision = m / a.candidate_len;
    double recall = m / a.reference_len;
    double f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    double frag = static_cast<double>(a.chunks) / m;
    double penalty = 0.5 * frag * frag * frag;
    return f_mean * (1.0 - penalty);
}

} // namespace distill
