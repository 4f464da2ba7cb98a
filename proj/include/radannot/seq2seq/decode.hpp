#pragma once

// Length-unnormalized beam search over the extended vocabulary, greedy
// decoding, and report-level annotation assembly.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/seq2seq/model.hpp"
#include "radannot/seq2seq/vocab.hpp"

namespace radannot::seq2seq {

struct Hypothesis {
    std::vector<int> tokens; // extended ids; ends with EOS when finished
    double log_prob = 0;
    Eigen::VectorXd h, c;
    bool finished = false;
};

namespace detail {

// First index of the maximum after the probability floor, so equal scores
// pick the lowest id exactly as the beam's tie-break does.
inline int argmax_lowest(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < int(v.size()); ++i)
        if (std::max(v(i), kProbFloor) > std::max(v(best), kProbFloor)) best = i;
    return best;
}

} // namespace detail

inline std::vector<int> greedy_decode(const PointerGenModel& m, const Encoded& e, int max_len) {
    std::vector<int> out;
    Eigen::VectorXd h = e.h0, c = e.c0;
    int prev = kSos;
    for (int t = 0; t < max_len; ++t) {
        DecodeStep step = decode_step(m, e, prev, h, c);
        int tok = detail::argmax_lowest(step.dist);
        out.push_back(tok);
        if (tok == kEos) break;
        prev = tok;
        h = step.h;
        c = step.c;
    }
    return out;
}

// Standard beam search: per step each live hypothesis proposes its best
// continuations, the global top beam_size survive, EOS moves a hypothesis
// to the finished pool. Stops once no live hypothesis can beat the best
// finished one. Ties break toward the lower token id, then the earlier
// parent, matching the greedy argmax at beam size 1.
inline Hypothesis beam_search(const PointerGenModel& m, const Encoded& e, int beam_size, int max_len) {
    if (beam_size < 1) throw BadConfig("beam size must be at least 1");
    if (max_len < 1) throw BadConfig("decode length must be at least 1");

    Hypothesis start;
    start.h = e.h0;
    start.c = e.c0;
    std::vector<Hypothesis> live = {start};
    std::vector<Hypothesis> finished;

    struct Cand {
        double log_prob;
        int parent;
        int token;
    };

    for (int t = 0; t < max_len && !live.empty(); ++t) {
        std::vector<Cand> cands;
        std::vector<DecodeStep> steps(live.size());
        for (std::size_t p = 0; p < live.size(); ++p) {
            const Hypothesis& hyp = live[p];
            int prev = hyp.tokens.empty() ? kSos : hyp.tokens.back();
            steps[p] = decode_step(m, e, prev, hyp.h, hyp.c);
            const Eigen::VectorXd& dist = steps[p].dist;

            // per-parent preselection: 2·beam_size covers EOS absorption
            std::vector<int> idx(std::size_t(dist.size()));
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
            std::size_t keep = std::min(idx.size(), std::size_t(2 * beam_size));
            std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(keep), idx.end(),
                              [&](int a, int b) {
                                  if (dist(a) != dist(b)) return dist(a) > dist(b);
                                  return a < b;
                              });
            for (std::size_t i = 0; i < keep; ++i)
                cands.push_back({hyp.log_prob + std::log(std::max(dist(idx[i]), kProbFloor)), int(p), idx[i]});
        }

        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });

        std::vector<Hypothesis> next;
        std::size_t fin_this_step = 0;
        for (const Cand& c : cands) {
            Hypothesis hyp = live[std::size_t(c.parent)];
            hyp.tokens.push_back(c.token);
            hyp.log_prob = c.log_prob;
            hyp.h = steps[std::size_t(c.parent)].h;
            hyp.c = steps[std::size_t(c.parent)].c;
            if (c.token == kEos) {
                hyp.finished = true;
                finished.push_back(std::move(hyp));
                ++fin_this_step;
            } else if (int(next.size()) < beam_size) {
                next.push_back(std::move(hyp));
            }
            if (int(next.size()) >= beam_size || fin_this_step >= std::size_t(beam_size)) break;
        }
        live = std::move(next);

        if (!finished.empty() && !live.empty()) {
            double best_fin = finished[0].log_prob;
            for (const auto& f : finished) best_fin = std::max(best_fin, f.log_prob);
            double best_live = live[0].log_prob;
            for (const auto& l : live) best_live = std::max(best_live, l.log_prob);
            if (best_live <= best_fin) break; // extensions only lose probability
        }
    }

    const Hypothesis* best = nullptr;
    for (const auto& f : finished)
        if (!best || f.log_prob > best->log_prob) best = &f;
    if (!best)
        for (const auto& l : live)
            if (!best || l.log_prob > best->log_prob) best = &l;
    if (!best) throw NumericalError("beam search produced no hypothesis");
    return *best;
}

// Decoded ids → annotation strings: drop the terminal, split on the
// annotation separator, join each group's terms with "/".
inline std::vector<std::string> render_annotations(const Vocab& v, const SourceEncoding& src,
                                                   const std::vector<int>& ids) {
    std::vector<std::string> out;
    std::vector<std::string> terms;
    std::string term;
    auto flush_term = [&]() {
        std::string t = str::trim(term);
        if (!t.empty()) terms.push_back(t);
        term.clear();
    };
    auto flush_annotation = [&]() {
        flush_term();
        if (!terms.empty()) out.push_back(str::join(terms, "/"));
        terms.clear();
    };
    for (int id : ids) {
        if (id == kEos) break;
        if (id == kPad || id == kSos) continue;
        if (id == kAnnSep) {
            flush_annotation();
            continue;
        }
        if (id == kSlash) {
            flush_term();
            continue;
        }
        if (!term.empty()) term += ' ';
        term += src.token_of(v, id);
    }
    flush_annotation();
    return out;
}

// Decode every sentence and union the results, first occurrence first.
// paragraph_mode feeds the whole report as one source instead.
inline std::vector<std::string> annotate_report(const PointerGenModel& m, const corpus::Report& r,
                                                int beam_size, int max_len, bool paragraph_mode = false) {
    std::vector<std::vector<std::string>> sources;
    if (paragraph_mode) {
        std::vector<std::string> tokens;
        for (const auto& s : corpus::split_sentences(r))
            tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
        if (!tokens.empty()) sources.push_back(std::move(tokens));
    } else {
        for (const auto& s : corpus::split_sentences(r))
            if (!s.tokens.empty()) sources.push_back(s.tokens);
    }

    std::vector<std::string> out;
    for (const auto& tokens : sources) {
        SourceEncoding src = encode_source(m.vocab, tokens);
        Encoded enc = encode(m, src);
        Hypothesis hyp = beam_search(m, enc, beam_size, max_len);
        for (auto& ann : render_annotations(m.vocab, src, hyp.tokens))
            if (std::find(out.begin(), out.end(), ann) == out.end()) out.push_back(std::move(ann));
    }
    return out;
}

// one report per line: id, tab, annotations joined by "; "
inline std::string annotation_line(const std::string& report_id, const std::vector<std::string>& annotations) {
    return report_id + "\t" + str::join(annotations, "; ");
}

} // namespace radannot::seq2seq
