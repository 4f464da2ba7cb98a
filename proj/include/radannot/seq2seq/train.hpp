#pragma once

// Teacher-forced training of the pointer-generator on matched
// sentence→annotation pairs: Adam, global-norm gradient clipping, seeded
// shuffling, and best-validation parameter retention.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/match_types.hpp"
#include "radannot/seq2seq/model.hpp"
#include "radannot/seq2seq/vocab.hpp"

namespace radannot::seq2seq {

struct Example {
    SourceEncoding source;
    std::vector<int> targets; // extended ids, EOS-terminated
};

// Vocabulary over sentence tokens and annotation term words of a corpus.
inline Vocab vocab_from_reports(const std::vector<corpus::Report>& reports, int min_freq = 1) {
    std::vector<std::vector<std::string>> sequences;
    for (const auto& r : reports) {
        for (const auto& s : corpus::split_sentences(r))
            if (!s.tokens.empty()) sequences.push_back(s.tokens);
        if (!r.annotations.empty()) sequences.push_back(target_surfaces(r.annotations));
    }
    return build_vocab(sequences, min_freq);
}

// One example per sentence. A sentence's target holds the annotations whose
// matched pair points at it, in annotation order; sentences nothing points
// at get the bare terminal.
inline std::vector<Example> make_examples(const Vocab& v, const std::vector<corpus::Report>& reports,
                                          const std::vector<match::MatchedPair>& matches) {
    std::map<std::string, std::map<int, std::vector<std::size_t>>> by_sentence;
    for (const auto& p : matches) {
        if (p.label != 1 || p.unmatched()) continue;
        by_sentence[p.report_id][p.sentence_index].push_back(p.annotation_index);
    }
    std::vector<Example> out;
    for (const auto& r : reports) {
        auto rit = by_sentence.find(r.id);
        for (const auto& s : corpus::split_sentences(r)) {
            if (s.tokens.empty()) continue;
            std::vector<corpus::Annotation> anns;
            if (rit != by_sentence.end()) {
                auto sit = rit->second.find(s.index);
                if (sit != rit->second.end()) {
                    std::vector<std::size_t> order = sit->second;
                    std::sort(order.begin(), order.end());
                    for (std::size_t ai : order)
                        if (ai < r.annotations.size()) anns.push_back(r.annotations[ai]);
                }
            }
            Example x;
            x.source = encode_source(v, s.tokens);
            x.targets = build_targets(v, x.source, anns);
            out.push_back(std::move(x));
        }
    }
    return out;
}

// Paragraph-level variant: the whole report is one source and its full
// annotation list one target.
inline std::vector<Example> make_paragraph_examples(const Vocab& v, const std::vector<corpus::Report>& reports) {
    std::vector<Example> out;
    for (const auto& r : reports) {
        std::vector<std::string> tokens;
        for (const auto& s : corpus::split_sentences(r))
            tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
        if (tokens.empty()) continue;
        Example x;
        x.source = encode_source(v, tokens);
        x.targets = build_targets(v, x.source, r.annotations);
        out.push_back(std::move(x));
    }
    return out;
}

// mean −log P(gold) per target position over a dataset, forward only
inline double dataset_loss(const PointerGenModel& m, const std::vector<Example>& xs) {
    double sum = 0;
    std::size_t positions = 0;
    for (const auto& x : xs) {
        PairTrace t = pair_forward(m, x.source, x.targets);
        sum += t.loss_sum;
        positions += x.targets.size();
    }
    return positions ? sum / double(positions) : 0.0;
}

namespace detail {

inline std::vector<Eigen::MatrixXd*> tensor_ptrs(PointerGenModel& m) {
    std::vector<Eigen::MatrixXd*> out;
    m.for_each_tensor([&](const std::string&, Eigen::MatrixXd& t) { out.push_back(&t); });
    return out;
}

inline std::vector<const Eigen::MatrixXd*> tensor_ptrs(const PointerGenModel& m) {
    std::vector<const Eigen::MatrixXd*> out;
    m.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { out.push_back(&t); });
    return out;
}

class Adam {
public:
    Adam(const PointerGenModel& shape, double lr) : lr_(lr) {
        shape.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) {
            m_.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
            v_.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
        });
    }

    void step(PointerGenModel& model, const PointerGenModel& grads) {
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double c1 = 1.0 - std::pow(b1, double(t_));
        double c2 = 1.0 - std::pow(b2, double(t_));
        auto params = tensor_ptrs(model);
        auto gs = tensor_ptrs(grads);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Eigen::MatrixXd& g = *gs[i];
            m_[i] = b1 * m_[i] + (1.0 - b1) * g;
            v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
            params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
        }
    }

private:
    double lr_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

inline double global_norm(const PointerGenModel& grads) {
    double sq = 0;
    grads.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { sq += t.squaredNorm(); });
    return std::sqrt(sq);
}

inline void clip_global_norm(PointerGenModel& grads, double max_norm) {
    double norm = global_norm(grads);
    if (!std::isfinite(norm)) throw NaNGuard("gradient norm is not finite");
    if (norm <= max_norm || norm == 0.0) return;
    double scale = max_norm / norm;
    grads.for_each_tensor([&](const std::string&, Eigen::MatrixXd& t) { t *= scale; });
}

inline std::vector<Eigen::MatrixXd> snapshot(const PointerGenModel& m) {
    std::vector<Eigen::MatrixXd> out;
    m.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { out.push_back(t); });
    return out;
}

inline void restore(PointerGenModel& m, const std::vector<Eigen::MatrixXd>& snap) {
    std::size_t i = 0;
    m.for_each_tensor([&](const std::string&, Eigen::MatrixXd& t) { t = snap[i++]; });
}

} // namespace detail

struct TrainResult {
    std::vector<double> train_losses; // per epoch, mean per target position
    std::vector<double> val_losses;
    double best_val_loss = 0;
    int best_epoch = -1;
};

// Mini-batch training. Batch loss is the mean over all target positions in
// the batch; with no validation set the epoch's training loss stands in for
// it. The model ends at the best-validation parameters.
inline TrainResult train(PointerGenModel& model, const std::vector<Example>& train_set,
                         const std::vector<Example>& val_set, const TrainConfig& tc) {
    if (train_set.empty()) throw EmptyTrainingSet("no training pairs");
    if (tc.epochs < 1 || tc.batch_size < 1 || tc.learning_rate <= 0 || tc.grad_clip_norm <= 0)
        throw BadConfig("training hyperparameters must be positive");

    Rng rng(tc.seed);
    detail::Adam adam(model, tc.learning_rate);
    TrainResult res;
    res.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> best = detail::snapshot(model);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sum = 0;
        std::size_t epoch_positions = 0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(tc.batch_size)) {
            std::size_t end = std::min(order.size(), start + std::size_t(tc.batch_size));
            std::size_t batch_positions = 0;
            for (std::size_t i = start; i < end; ++i) batch_positions += train_set[order[i]].targets.size();

            PointerGenModel grads = zero_like(model);
            for (std::size_t i = start; i < end; ++i) {
                const Example& x = train_set[order[i]];
                PairTrace t = pair_forward(model, x.source, x.targets);
                pair_backward(model, t, 1.0 / double(batch_positions), grads);
                epoch_sum += t.loss_sum;
            }
            epoch_positions += batch_positions;
            detail::clip_global_norm(grads, tc.grad_clip_norm);
            adam.step(model, grads);
        }
        if (!all_finite(model)) throw NaNGuard("parameters diverged during training");

        res.train_losses.push_back(epoch_sum / double(epoch_positions));
        double val = val_set.empty() ? res.train_losses.back() : dataset_loss(model, val_set);
        res.val_losses.push_back(val);
        if (val < res.best_val_loss) {
            res.best_val_loss = val;
            res.best_epoch = epoch;
            best = detail::snapshot(model);
        }
    }
    detail::restore(model, best);
    return res;
}

} // namespace radannot::seq2seq
