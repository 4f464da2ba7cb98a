#pragma once

// Sentence encoder over the embedding table: mean pooling plus a
// calibrated similarity threshold separating matching from non-matching
// sentence-annotation pairs.

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/embedding.hpp"
#include "radannot/match_types.hpp"

namespace radannot::embed {

struct SentenceEncoder {
    const EmbeddingTable* table = nullptr;
    double threshold = 0.0;

    // arithmetic mean of token vectors; dimension is table.dim regardless
    // of input length
    Eigen::VectorXf embed(const std::vector<std::string>& tokens) const {
        if (tokens.empty()) throw EmptySentence("cannot embed an empty token list");
        Eigen::VectorXf acc = Eigen::VectorXf::Zero(table->dim());
        for (const auto& t : tokens) acc += table->vector(t);
        return acc / float(tokens.size());
    }
};

// A sentence paired with a de-slashed annotation; label 1 when they
// belong together.
struct LabeledPair {
    std::vector<std::string> sentence_tokens;
    std::vector<std::string> annotation_tokens;
    int label = 0;
};

inline double pair_similarity(const SentenceEncoder& enc, const LabeledPair& p) {
    return cosine(enc.embed(p.sentence_tokens), enc.embed(p.annotation_tokens));
}

// Threshold maximizing classification accuracy (similarity > threshold
// reads as label 1). Candidates are the observed scores, midpoints
// between consecutive distinct scores, and one value below the minimum
// so the trivial all-one classifier stays expressible. Ties resolve to
// the largest threshold.
inline double calibrate_threshold(const SentenceEncoder& enc, const std::vector<LabeledPair>& pairs) {
    bool has_pos = false, has_neg = false;
    for (const auto& p : pairs) (p.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DegenerateLabels("threshold calibration needs both labels");

    std::vector<std::pair<double, int>> scored; // similarity, label
    scored.reserve(pairs.size());
    for (const auto& p : pairs) scored.emplace_back(pair_similarity(enc, p), p.label);

    std::vector<double> values;
    values.reserve(scored.size());
    for (const auto& [s, l] : scored) values.push_back(s);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    std::vector<double> candidates;
    candidates.push_back(values.front() - 1.0);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        candidates.push_back(values[i]);
        candidates.push_back(0.5 * (values[i] + values[i + 1]));
    }
    candidates.push_back(values.back());

    double best_t = candidates.front();
    std::size_t best_correct = 0;
    for (double t : candidates) {
        std::size_t correct = 0;
        for (const auto& [s, l] : scored) {
            int predicted = s > t ? 1 : 0;
            if (predicted == l) ++correct;
        }
        if (correct > best_correct || (correct == best_correct && t > best_t)) {
            best_correct = correct;
            best_t = t;
        }
    }
    return best_t;
}

// Builds calibration data from manual matches: every matched pair labeled
// 1 and exactly two random non-matching sentence-annotation combinations
// per report labeled 0 (fewer when a report has fewer combinations).
inline std::vector<LabeledPair> make_encoder_pairs(const std::vector<corpus::Report>& reports,
                                                   const std::vector<match::MatchedPair>& manual_matches,
                                                   std::uint64_t seed) {
    std::vector<LabeledPair> out;
    Rng rng(seed);
    for (const auto& r : reports) {
        if (r.annotations.empty() || !r.has_text()) continue;
        std::vector<corpus::Sentence> sents = corpus::split_sentences(r);
        if (sents.empty()) continue;

        std::set<std::pair<int, int>> matched; // (sentence, annotation)
        for (const auto& m : manual_matches) {
            if (m.report_id != r.id || m.label != 1 || m.unmatched()) continue;
            if (m.sentence_index >= int(sents.size()) || m.annotation_index >= int(r.annotations.size())) continue;
            matched.insert({m.sentence_index, m.annotation_index});
            LabeledPair p;
            p.sentence_tokens = sents[std::size_t(m.sentence_index)].tokens;
            p.annotation_tokens = text::tokenize(r.annotations[std::size_t(m.annotation_index)].deslashed());
            p.label = 1;
            out.push_back(std::move(p));
        }

        std::vector<std::pair<int, int>> negatives;
        for (int si = 0; si < int(sents.size()); ++si)
            for (int ai = 0; ai < int(r.annotations.size()); ++ai)
                if (!matched.count({si, ai})) negatives.emplace_back(si, ai);
        std::size_t want = std::min<std::size_t>(2, negatives.size());
        for (std::size_t n = 0; n < want; ++n) {
            std::size_t pick = n + std::size_t(rng.below(negatives.size() - n));
            std::swap(negatives[n], negatives[pick]);
            LabeledPair p;
            p.sentence_tokens = sents[std::size_t(negatives[n].first)].tokens;
            p.annotation_tokens = text::tokenize(r.annotations[std::size_t(negatives[n].second)].deslashed());
            p.label = 0;
            out.push_back(std::move(p));
        }
    }
    return out;
}

} // namespace radannot::embed
