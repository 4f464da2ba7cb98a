#pragma once

// Sequence evaluation: corpus BLEU-1..4 with a minimum-reference-length
// filter per order, ROUGE-L F1, and METEOR with exact and stem matching
// stages. All inputs are lowercase token sequences.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/porter.hpp"

namespace radannot::metrics {

struct EvalPair {
    std::vector<std::string> candidate;
    std::vector<std::string> reference;
};

namespace detail {

inline void require_reference(const EvalPair& p) {
    if (p.reference.empty()) throw DataError("evaluation pair has empty reference");
}

inline std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& toks, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (int(toks.size()) < n) return counts;
    for (std::size_t i = 0; i + std::size_t(n) <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + long(i), toks.begin() + long(i) + n)];
    return counts;
}

} // namespace detail

// Corpus-level BLEU with uniform weights over orders 1..N. Pairs whose
// reference is shorter than N tokens are dropped before anything is
// counted. The optional add-one smoothing is a debug aid, not the
// canonical score.
inline double bleu_n(const std::vector<EvalPair>& pairs, int N, bool add_one_smoothing = false) {
    if (N < 1 || N > 4) throw BadConfig("bleu order must be 1..4");
    std::vector<const EvalPair*> eligible;
    for (const auto& p : pairs) {
        detail::require_reference(p);
        if (int(p.reference.size()) >= N) eligible.push_back(&p);
    }
    if (eligible.empty()) throw NoEligiblePairs("no pair has a reference with at least " + std::to_string(N) + " tokens");

    long long cand_len = 0, ref_len = 0;
    std::vector<long long> matched(std::size_t(N), 0), total(std::size_t(N), 0);
    for (const EvalPair* p : eligible) {
        cand_len += (long long)p->candidate.size();
        ref_len += (long long)p->reference.size();
        for (int n = 1; n <= N; ++n) {
            auto cc = detail::ngram_counts(p->candidate, n);
            auto rc = detail::ngram_counts(p->reference, n);
            for (const auto& [g, c] : cc) {
                auto it = rc.find(g);
                if (it != rc.end()) matched[std::size_t(n - 1)] += std::min(c, it->second);
            }
            total[std::size_t(n - 1)] += std::max<long long>(0, (long long)p->candidate.size() - n + 1);
        }
    }
    if (cand_len == 0) return 0.0;

    double log_prec = 0.0;
    for (int n = 1; n <= N; ++n) {
        double num = double(matched[std::size_t(n - 1)]);
        double den = double(total[std::size_t(n - 1)]);
        if (add_one_smoothing) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0 || den == 0.0) return 0.0;
        log_prec += std::log(num / den) / double(N);
    }
    double bp = cand_len < ref_len ? std::exp(1.0 - double(ref_len) / double(cand_len)) : 1.0;
    return bp * std::exp(log_prec);
}

inline int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
    return dp[a.size()][b.size()];
}

inline double rouge_l_f1(const EvalPair& pair) {
    detail::require_reference(pair);
    if (pair.candidate.empty()) return 0.0;
    int lcs = lcs_length(pair.candidate, pair.reference);
    if (lcs == 0) return 0.0;
    double p = double(lcs) / double(pair.candidate.size());
    double r = double(lcs) / double(pair.reference.size());
    return 2.0 * p * r / (p + r);
}

namespace detail {

// Alignment for METEOR. Stage 1 pairs equal words, stage 2 pairs
// remaining words whose Porter stems agree. The number of matches is
// fixed by per-type counts; the backtracking search only decides which
// positions pair up, minimizing the chunk count. A node cap keeps the
// search bounded; on overflow the deterministic greedy pairing stands.
struct MeteorAligner {
    const std::vector<std::string>& cand;
    const std::vector<std::string>& ref;
    std::vector<std::string> cand_stem, ref_stem;
    std::unordered_map<std::string, int> exact_quota;      // per word
    std::unordered_map<std::string, int> stem_quota;       // per stem
    std::unordered_map<std::string, int> stem_ref_cap;     // per ref word: copies stage 2 may consume
    int total_matches = 0;

    std::vector<int> assign;        // cand index -> ref index or -1
    std::vector<bool> ref_used;
    std::unordered_map<std::string, int> exact_used, stem_used, stem_ref_used;
    std::unordered_map<std::string, int> cand_word_left;   // positions not yet decided, per word

    std::vector<int> best_assign;
    int best_chunks = 0;
    long nodes = 0;
    static constexpr long kNodeCap = 1 << 18;

    MeteorAligner(const std::vector<std::string>& c, const std::vector<std::string>& r) : cand(c), ref(r) {
        cand_stem.reserve(c.size());
        ref_stem.reserve(r.size());
        for (const auto& w : c) cand_stem.push_back(text::porter_stem(w));
        for (const auto& w : r) ref_stem.push_back(text::porter_stem(w));

        std::unordered_map<std::string, int> cc, cr;
        for (const auto& w : c) ++cc[w];
        for (const auto& w : r) ++cr[w];
        for (const auto& [w, n] : cc) {
            auto it = cr.find(w);
            exact_quota[w] = it == cr.end() ? 0 : std::min(n, it->second);
        }
        std::unordered_map<std::string, int> res_c, res_r;
        for (const auto& [w, n] : cc) {
            int q = exact_quota[w];
            if (n > q) res_c[stem_of(w, true)] += n - q;
        }
        for (const auto& [w, n] : cr) {
            int q = 0;
            auto it = exact_quota.find(w);
            if (it != exact_quota.end()) q = it->second;
            if (n > q) res_r[stem_of(w, false)] += n - q;
            stem_ref_cap[w] = n - q;
        }
        for (const auto& [s, n] : res_c) {
            auto it = res_r.find(s);
            stem_quota[s] = it == res_r.end() ? 0 : std::min(n, it->second);
        }
        for (const auto& [w, q] : exact_quota) total_matches += q;
        for (const auto& [s, q] : stem_quota) total_matches += q;
        for (const auto& w : c) ++cand_word_left[w];
    }

    std::string stem_of(const std::string& w, bool) const { return text::porter_stem(w); }

    int chunks_of(const std::vector<int>& a) const {
        int chunks = 0;
        int prev_i = -2, prev_j = -2;
        for (int i = 0; i < int(a.size()); ++i) {
            if (a[std::size_t(i)] < 0) continue;
            if (!(i == prev_i + 1 && a[std::size_t(i)] == prev_j + 1)) ++chunks;
            prev_i = i;
            prev_j = a[std::size_t(i)];
        }
        return chunks;
    }

    void greedy() {
        assign.assign(cand.size(), -1);
        ref_used.assign(ref.size(), false);
        std::unordered_map<std::string, int> eu, su, sru;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            const std::string& w = cand[i];
            if (eu[w] < exact_quota[w]) {
                for (std::size_t j = 0; j < ref.size(); ++j)
                    if (!ref_used[j] && ref[j] == w) {
                        assign[i] = int(j);
                        ref_used[j] = true;
                        ++eu[w];
                        break;
                    }
            }
        }
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (assign[i] >= 0) continue;
            const std::string& s = cand_stem[i];
            auto qit = stem_quota.find(s);
            if (qit == stem_quota.end() || su[s] >= qit->second) continue;
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (ref_used[j] || ref_stem[j] != s) continue;
                if (sru[ref[j]] >= stem_ref_cap[ref[j]]) continue;
                assign[i] = int(j);
                ref_used[j] = true;
                ++su[s];
                ++sru[ref[j]];
                break;
            }
        }
        best_assign = assign;
        best_chunks = chunks_of(assign);
    }

    void dfs(std::size_t i) {
        if (++nodes > kNodeCap) return;
        if (i == cand.size()) {
            for (const auto& [s, q] : stem_quota)
                if (stem_used[s] < q) return;
            int ch = chunks_of(assign);
            if (ch < best_chunks) {
                best_chunks = ch;
                best_assign = assign;
            }
            return;
        }
        const std::string& w = cand[i];
        const std::string& s = cand_stem[i];
        --cand_word_left[w];

        if (exact_used[w] < exact_quota[w]) {
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (ref_used[j] || ref[j] != w) continue;
                ref_used[j] = true;
                ++exact_used[w];
                assign[i] = int(j);
                dfs(i + 1);
                assign[i] = -1;
                --exact_used[w];
                ref_used[j] = false;
                if (nodes > kNodeCap) break;
            }
        }
        // skipping the exact stage here must leave enough later copies
        bool can_defer = cand_word_left[w] >= exact_quota[w] - exact_used[w];
        if (can_defer && nodes <= kNodeCap) {
            auto qit = stem_quota.find(s);
            if (qit != stem_quota.end() && stem_used[s] < qit->second) {
                for (std::size_t j = 0; j < ref.size(); ++j) {
                    if (ref_used[j] || ref_stem[j] != s || ref[j] == w) continue;
                    if (stem_ref_used[ref[j]] >= stem_ref_cap[ref[j]]) continue;
                    ref_used[j] = true;
                    ++stem_used[s];
                    ++stem_ref_used[ref[j]];
                    assign[i] = int(j);
                    dfs(i + 1);
                    assign[i] = -1;
                    --stem_ref_used[ref[j]];
                    --stem_used[s];
                    ref_used[j] = false;
                    if (nodes > kNodeCap) break;
                }
            }
            if (nodes <= kNodeCap) dfs(i + 1); // leave unmatched
        }
        ++cand_word_left[w];
    }

    // matches and chunk count of the chosen alignment
    std::pair<int, int> run() {
        greedy();
        if (total_matches > 0) {
            assign.assign(cand.size(), -1);
            ref_used.assign(ref.size(), false);
            exact_used.clear();
            stem_used.clear();
            stem_ref_used.clear();
            dfs(0);
        }
        return {total_matches, best_chunks};
    }
};

} // namespace detail

inline double meteor(const EvalPair& pair) {
    detail::require_reference(pair);
    if (pair.candidate.empty()) return 0.0;
    detail::MeteorAligner aligner(pair.candidate, pair.reference);
    auto [matches, chunks] = aligner.run();
    if (matches == 0) return 0.0;
    double p = double(matches) / double(pair.candidate.size());
    double r = double(matches) / double(pair.reference.size());
    double fmean = 10.0 * p * r / (r + 9.0 * p);
    double frag = double(chunks) / double(matches);
    double penalty = 0.5 * frag * frag * frag;
    return fmean * (1.0 - penalty);
}

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / double(xs.size());
}

struct EvalSummary {
    std::optional<double> bleu[4];  // orders 1..4; empty when the length filter removed every pair
    double meteor = 0.0;
    double rouge_l = 0.0;
    std::size_t pairs = 0;
};

inline EvalSummary evaluate_pairs(const std::vector<EvalPair>& pairs) {
    if (pairs.empty()) throw NoEligiblePairs("no evaluation pairs");
    EvalSummary s;
    s.pairs = pairs.size();
    for (int n = 1; n <= 4; ++n) {
        try {
            s.bleu[n - 1] = bleu_n(pairs, n);
        } catch (const NoEligiblePairs&) {
            s.bleu[n - 1] = std::nullopt;
        }
    }
    std::vector<double> met, rou;
    met.reserve(pairs.size());
    rou.reserve(pairs.size());
    for (const auto& p : pairs) {
        met.push_back(meteor(p));
        rou.push_back(rouge_l_f1(p));
    }
    s.meteor = mean(met);
    s.rouge_l = mean(rou);
    return s;
}

inline std::string render_evaluation(const EvalSummary& s, const std::string& label = "") {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    auto cell = [&](const std::optional<double>& v) {
        std::ostringstream c;
        if (v) {
            c.setf(std::ios::fixed);
            c.precision(4);
            c << *v;
        } else {
            c << "-";
        }
        std::string str = c.str();
        while (str.size() < 8) str.insert(str.begin(), ' ');
        return str;
    };
    if (!label.empty()) os << label << " (" << s.pairs << " pairs)\n";
    os << "  BLEU-1    BLEU-2    BLEU-3    BLEU-4    METEOR   ROUGE-L\n";
    os << cell(s.bleu[0]) << "  " << cell(s.bleu[1]) << "  " << cell(s.bleu[2]) << "  " << cell(s.bleu[3])
       << "  " << cell(s.meteor) << "  " << cell(s.rouge_l) << "\n";
    for (int n = 0; n < 4; ++n) {
        os << "bleu" << (n + 1) << "=";
        if (s.bleu[n])
            os << *s.bleu[n];
        else
            os << "na";
        os << "\n";
    }
    os << "meteor=" << s.meteor << "\n";
    os << "rouge_l=" << s.rouge_l << "\n";
    os << "pairs=" << s.pairs << "\n";
    return os.str();
}

} // namespace radannot::metrics
