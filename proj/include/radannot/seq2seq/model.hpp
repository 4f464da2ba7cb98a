#pragma once

// Pointer-generator sentence-to-annotation network: stacked BiLSTM encoder,
// LSTM decoder with additive attention, and a generate/copy mixture over an
// extended vocabulary. Double precision throughout; the file format stores
// tensors as 32-bit floats.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "radannot/common.hpp"
#include "radannot/seq2seq/vocab.hpp"

namespace radannot::seq2seq {

struct ModelConfig {
    int embed_dim = 100;
    int enc_hidden = 256; // per direction
    int enc_layers = 2;
    int dec_hidden = 512; // must equal both encoder directions combined
    int attn_dim = 0;     // 0 → dec_hidden
};

struct TrainConfig {
    double learning_rate = 0.001;
    int batch_size = 16;
    double grad_clip_norm = 5.0;
    int beam_size = 5;
    int max_decode_len = 40;
    int epochs = 30;
    std::uint64_t seed = 1;
    int min_token_freq = 1;
};

// probability floor applied before every log
inline constexpr double kProbFloor = 1e-12;

struct Lstm {
    Eigen::MatrixXd W; // 4H × input
    Eigen::MatrixXd U; // 4H × H
    Eigen::MatrixXd b; // 4H × 1, gate rows ordered input/forget/candidate/output
};

struct PointerGenModel {
    ModelConfig config;
    Vocab vocab;

    Eigen::MatrixXd embed; // V × embed_dim
    std::vector<Lstm> enc_fwd, enc_bwd;
    Lstm dec;
    Eigen::MatrixXd bridge_h_W, bridge_h_b; // encoder finals → decoder h0
    Eigen::MatrixXd bridge_c_W, bridge_c_b;
    Eigen::MatrixXd attn_Wh, attn_Ws, attn_b, attn_v;
    Eigen::MatrixXd pgen_wc, pgen_ws, pgen_wx, pgen_b;
    Eigen::MatrixXd out_W, out_b; // V × (dec_hidden + encoder state width)

    template <class Self, class F>
    static void visit_tensors(Self& m, F&& f) {
        f(std::string("embed"), m.embed);
        for (std::size_t l = 0; l < m.enc_fwd.size(); ++l) {
            std::string p = "enc" + std::to_string(l);
            f(p + ".fwd.W", m.enc_fwd[l].W);
            f(p + ".fwd.U", m.enc_fwd[l].U);
            f(p + ".fwd.b", m.enc_fwd[l].b);
            f(p + ".bwd.W", m.enc_bwd[l].W);
            f(p + ".bwd.U", m.enc_bwd[l].U);
            f(p + ".bwd.b", m.enc_bwd[l].b);
        }
        f(std::string("dec.W"), m.dec.W);
        f(std::string("dec.U"), m.dec.U);
        f(std::string("dec.b"), m.dec.b);
        f(std::string("bridge_h.W"), m.bridge_h_W);
        f(std::string("bridge_h.b"), m.bridge_h_b);
        f(std::string("bridge_c.W"), m.bridge_c_W);
        f(std::string("bridge_c.b"), m.bridge_c_b);
        f(std::string("attn.Wh"), m.attn_Wh);
        f(std::string("attn.Ws"), m.attn_Ws);
        f(std::string("attn.b"), m.attn_b);
        f(std::string("attn.v"), m.attn_v);
        f(std::string("pgen.wc"), m.pgen_wc);
        f(std::string("pgen.ws"), m.pgen_ws);
        f(std::string("pgen.wx"), m.pgen_wx);
        f(std::string("pgen.b"), m.pgen_b);
        f(std::string("out.W"), m.out_W);
        f(std::string("out.b"), m.out_b);
    }

    template <class F>
    void for_each_tensor(F&& f) {
        visit_tensors(*this, f);
    }
    template <class F>
    void for_each_tensor(F&& f) const {
        visit_tensors(*this, f);
    }

    int state_width() const { return 2 * config.enc_hidden; }
};

inline ModelConfig normalized(ModelConfig c) {
    if (c.attn_dim <= 0) c.attn_dim = c.dec_hidden;
    return c;
}

inline void validate(const ModelConfig& c) {
    if (c.embed_dim < 1 || c.enc_hidden < 1 || c.enc_layers < 1 || c.dec_hidden < 1)
        throw BadConfig("model dimensions must be positive");
    if (c.dec_hidden != 2 * c.enc_hidden)
        throw BadConfig("decoder hidden size must equal both encoder directions combined");
}

inline PointerGenModel init_model(const Vocab& vocab, ModelConfig config, std::uint64_t seed) {
    config = normalized(config);
    validate(config);
    if (vocab.size() < kNumSpecials) throw BadConfig("vocabulary missing the reserved token block");

    PointerGenModel m;
    m.config = config;
    m.vocab = vocab;
    const int V = vocab.size();
    const int E = config.embed_dim;
    const int H = config.enc_hidden;
    const int D = config.dec_hidden;
    const int A = config.attn_dim;
    const int S = 2 * H; // encoder state width

    m.embed.resize(V, E);
    m.enc_fwd.resize(std::size_t(config.enc_layers));
    m.enc_bwd.resize(std::size_t(config.enc_layers));
    for (int l = 0; l < config.enc_layers; ++l) {
        int in = l == 0 ? E : S;
        for (auto* cell : {&m.enc_fwd[std::size_t(l)], &m.enc_bwd[std::size_t(l)]}) {
            cell->W.resize(4 * H, in);
            cell->U.resize(4 * H, H);
            cell->b.resize(4 * H, 1);
        }
    }
    m.dec.W.resize(4 * D, E);
    m.dec.U.resize(4 * D, D);
    m.dec.b.resize(4 * D, 1);
    m.bridge_h_W.resize(D, S);
    m.bridge_h_b.resize(D, 1);
    m.bridge_c_W.resize(D, S);
    m.bridge_c_b.resize(D, 1);
    m.attn_Wh.resize(A, S);
    m.attn_Ws.resize(A, D);
    m.attn_b.resize(A, 1);
    m.attn_v.resize(A, 1);
    m.pgen_wc.resize(S, 1);
    m.pgen_ws.resize(D, 1);
    m.pgen_wx.resize(E, 1);
    m.pgen_b.resize(1, 1);
    m.out_W.resize(V, D + S);
    m.out_b.resize(V, 1);

    Rng rng(seed);
    m.for_each_tensor([&](const std::string&, Eigen::MatrixXd& t) {
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-0.1, 0.1);
    });
    // forget-gate bias starts open so early gradients reach back in time
    for (int l = 0; l < config.enc_layers; ++l) {
        m.enc_fwd[std::size_t(l)].b.block(H, 0, H, 1).array() += 1.0;
        m.enc_bwd[std::size_t(l)].b.block(H, 0, H, 1).array() += 1.0;
    }
    m.dec.b.block(D, 0, D, 1).array() += 1.0;
    return m;
}

namespace detail {

inline Eigen::VectorXd sigmoid_v(const Eigen::VectorXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

inline Eigen::VectorXd tanh_v(const Eigen::VectorXd& z) { return z.array().tanh().matrix(); }

inline Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
    return (e / e.sum()).matrix();
}

struct LstmCache {
    Eigen::VectorXd x, h_prev, c_prev;
    Eigen::VectorXd i, f, g, o, c, tanh_c, h;
};

inline void lstm_step(const Lstm& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                      const Eigen::VectorXd& c_prev, LstmCache& k) {
    const Eigen::Index H = p.U.cols();
    Eigen::VectorXd z = p.W * x + p.U * h_prev + p.b.col(0);
    k.x = x;
    k.h_prev = h_prev;
    k.c_prev = c_prev;
    k.i = sigmoid_v(z.segment(0, H));
    k.f = sigmoid_v(z.segment(H, H));
    k.g = tanh_v(z.segment(2 * H, H));
    k.o = sigmoid_v(z.segment(3 * H, H));
    k.c = (k.f.array() * c_prev.array() + k.i.array() * k.g.array()).matrix();
    k.tanh_c = tanh_v(k.c);
    k.h = (k.o.array() * k.tanh_c.array()).matrix();
}

// dh/dc_in are gradients w.r.t. this step's outputs; returns gradients for
// the step's inputs and accumulates parameter gradients into g.
inline void lstm_backward(const Lstm& p, const LstmCache& k, const Eigen::VectorXd& dh,
                          const Eigen::VectorXd& dc_in, Lstm& g, Eigen::VectorXd& dx,
                          Eigen::VectorXd& dh_prev, Eigen::VectorXd& dc_prev) {
    const Eigen::Index H = p.U.cols();
    Eigen::ArrayXd do_ = dh.array() * k.tanh_c.array();
    Eigen::ArrayXd dc = dc_in.array() + dh.array() * k.o.array() * (1.0 - k.tanh_c.array().square());
    Eigen::ArrayXd di = dc * k.g.array();
    Eigen::ArrayXd dg = dc * k.i.array();
    Eigen::ArrayXd df = dc * k.c_prev.array();
    dc_prev = (dc * k.f.array()).matrix();

    Eigen::VectorXd dz(4 * H);
    dz.segment(0, H) = (di * k.i.array() * (1.0 - k.i.array())).matrix();
    dz.segment(H, H) = (df * k.f.array() * (1.0 - k.f.array())).matrix();
    dz.segment(2 * H, H) = (dg * (1.0 - k.g.array().square())).matrix();
    dz.segment(3 * H, H) = (do_ * k.o.array() * (1.0 - k.o.array())).matrix();

    g.W.noalias() += dz * k.x.transpose();
    g.U.noalias() += dz * k.h_prev.transpose();
    g.b.col(0) += dz;
    dx.noalias() = p.W.transpose() * dz;
    dh_prev.noalias() = p.U.transpose() * dz;
}

} // namespace detail

// embedding row actually fed for an extended id
inline int feed_id(const PointerGenModel& m, int extended_id) {
    return extended_id < m.vocab.size() ? extended_id : kUnk;
}

// Encoder output plus everything the decoder needs per step. Also carries
// the caches the backward pass walks, which inference simply ignores.
struct Encoded {
    std::vector<int> src_ids; // extended
    int extended_size = 0;
    std::vector<std::vector<detail::LstmCache>> fwd, bwd; // [layer][position]
    std::vector<Eigen::VectorXd> states;                  // [position], width 2·enc_hidden
    std::vector<Eigen::VectorXd> attn_pre;                // attn_Wh·state + attn_b
    Eigen::VectorXd bridge_h_in, bridge_c_in, h0, c0;
};

inline Encoded encode(const PointerGenModel& m, const SourceEncoding& src) {
    if (src.ids.empty()) throw EmptySource("cannot encode an empty source");
    const int L = int(src.ids.size());
    const int H = m.config.enc_hidden;
    const int layers = m.config.enc_layers;

    Encoded e;
    e.src_ids = src.ids;
    e.extended_size = src.extended_size();
    e.fwd.resize(std::size_t(layers));
    e.bwd.resize(std::size_t(layers));

    auto inputs = std::vector<Eigen::VectorXd>(std::size_t(L));
    for (int i = 0; i < L; ++i) inputs[std::size_t(i)] = m.embed.row(feed_id(m, src.ids[std::size_t(i)])).transpose();

    for (int l = 0; l < layers; ++l) {
        auto& fl = e.fwd[std::size_t(l)];
        auto& bl = e.bwd[std::size_t(l)];
        fl.resize(std::size_t(L));
        bl.resize(std::size_t(L));
        Eigen::VectorXd h = Eigen::VectorXd::Zero(H), c = Eigen::VectorXd::Zero(H);
        for (int i = 0; i < L; ++i) {
            detail::lstm_step(m.enc_fwd[std::size_t(l)], inputs[std::size_t(i)], h, c, fl[std::size_t(i)]);
            h = fl[std::size_t(i)].h;
            c = fl[std::size_t(i)].c;
        }
        h.setZero();
        c.setZero();
        for (int i = L - 1; i >= 0; --i) {
            detail::lstm_step(m.enc_bwd[std::size_t(l)], inputs[std::size_t(i)], h, c, bl[std::size_t(i)]);
            h = bl[std::size_t(i)].h;
            c = bl[std::size_t(i)].c;
        }
        for (int i = 0; i < L; ++i) {
            Eigen::VectorXd cat(2 * H);
            cat.head(H) = fl[std::size_t(i)].h;
            cat.tail(H) = bl[std::size_t(i)].h;
            inputs[std::size_t(i)] = cat;
        }
    }
    e.states = inputs;

    const auto& top_f = e.fwd.back();
    const auto& top_b = e.bwd.back();
    e.bridge_h_in.resize(2 * H);
    e.bridge_h_in.head(H) = top_f.back().h;
    e.bridge_h_in.tail(H) = top_b.front().h;
    e.bridge_c_in.resize(2 * H);
    e.bridge_c_in.head(H) = top_f.back().c;
    e.bridge_c_in.tail(H) = top_b.front().c;
    e.h0 = detail::tanh_v(m.bridge_h_W * e.bridge_h_in + m.bridge_h_b.col(0));
    e.c0 = detail::tanh_v(m.bridge_c_W * e.bridge_c_in + m.bridge_c_b.col(0));

    e.attn_pre.resize(std::size_t(L));
    for (int i = 0; i < L; ++i)
        e.attn_pre[std::size_t(i)] = m.attn_Wh * e.states[std::size_t(i)] + m.attn_b.col(0);
    return e;
}

struct AttnCache {
    Eigen::MatrixXd u;       // attn_dim × L, tanh-ed scores pre-projection
    Eigen::VectorXd weights; // L, sums to 1
    Eigen::VectorXd ctx;     // encoder state width
};

namespace detail {

inline void attend_pre(const PointerGenModel& m, const std::vector<Eigen::VectorXd>& states,
                       const std::vector<Eigen::VectorXd>& pre, const Eigen::VectorXd& s, AttnCache& out) {
    const int L = int(states.size());
    Eigen::VectorXd ws = m.attn_Ws * s;
    out.u.resize(m.config.attn_dim, L);
    Eigen::VectorXd scores(L);
    for (int i = 0; i < L; ++i) {
        out.u.col(i) = (pre[std::size_t(i)] + ws).array().tanh().matrix();
        scores(i) = m.attn_v.col(0).dot(out.u.col(i));
    }
    out.weights = softmax(scores);
    out.ctx = Eigen::VectorXd::Zero(states[0].size());
    for (int i = 0; i < L; ++i) out.ctx += out.weights(i) * states[std::size_t(i)];
}

} // namespace detail

// additive attention over encoder states for one decoder state
inline AttnCache attend(const PointerGenModel& m, const std::vector<Eigen::VectorXd>& states,
                        const Eigen::VectorXd& s) {
    std::vector<Eigen::VectorXd> pre(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) pre[i] = m.attn_Wh * states[i] + m.attn_b.col(0);
    AttnCache out;
    detail::attend_pre(m, states, pre, s, out);
    return out;
}

// P(token) = p_gen·P_vocab + (1−p_gen)·attention mass of source positions
// holding that token; ids at or past the base vocabulary are copy-only.
inline Eigen::VectorXd final_distribution(const Eigen::VectorXd& vocab_dist, const Eigen::VectorXd& attn,
                                          double p_gen, const std::vector<int>& src_ids, int extended_size) {
    if (extended_size < int(vocab_dist.size()))
        throw DimensionMismatch("extended vocabulary smaller than the base vocabulary");
    if (attn.size() != Eigen::Index(src_ids.size()))
        throw DimensionMismatch("one attention weight per source position required");
    Eigen::VectorXd dist = Eigen::VectorXd::Zero(extended_size);
    dist.head(vocab_dist.size()) = p_gen * vocab_dist;
    for (std::size_t i = 0; i < src_ids.size(); ++i) {
        int id = src_ids[i];
        if (id < 0 || id >= extended_size)
            throw DimensionMismatch("source id " + std::to_string(id) + " outside the extended vocabulary");
        dist(id) += (1.0 - p_gen) * attn(Eigen::Index(i));
    }
    return dist;
}

struct StepCache {
    int x_id = 0; // embedding row fed this step
    detail::LstmCache lstm;
    AttnCache attn;
    Eigen::VectorXd pv;   // base-vocabulary softmax
    double p_gen = 0;
    Eigen::VectorXd dist; // extended distribution
};

namespace detail {

inline void decoder_step(const PointerGenModel& m, const Encoded& e, int prev_extended_id,
                         const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev, StepCache& k) {
    k.x_id = feed_id(m, prev_extended_id);
    Eigen::VectorXd x = m.embed.row(k.x_id).transpose();
    lstm_step(m.dec, x, h_prev, c_prev, k.lstm);
    attend_pre(m, e.states, e.attn_pre, k.lstm.h, k.attn);

    Eigen::VectorXd sc(m.config.dec_hidden + m.state_width());
    sc.head(m.config.dec_hidden) = k.lstm.h;
    sc.tail(m.state_width()) = k.attn.ctx;
    k.pv = softmax(m.out_W * sc + m.out_b.col(0));

    double u = m.pgen_wc.col(0).dot(k.attn.ctx) + m.pgen_ws.col(0).dot(k.lstm.h) + m.pgen_wx.col(0).dot(x) +
               m.pgen_b(0, 0);
    k.p_gen = 1.0 / (1.0 + std::exp(-u));
    k.dist = final_distribution(k.pv, k.attn.weights, k.p_gen, e.src_ids, e.extended_size);
}

} // namespace detail

// one inference step: feed the previous token, get the next distribution
struct DecodeStep {
    Eigen::VectorXd h, c;
    Eigen::VectorXd dist;  // over the extended vocabulary
    Eigen::VectorXd attn;
    double p_gen = 0;
};

inline DecodeStep decode_step(const PointerGenModel& m, const Encoded& e, int prev_extended_id,
                              const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev) {
    StepCache k;
    detail::decoder_step(m, e, prev_extended_id, h_prev, c_prev, k);
    return {k.lstm.h, k.lstm.c, std::move(k.dist), std::move(k.attn.weights), k.p_gen};
}

// Teacher-forced forward over one (source, target) pair. Loss is the sum of
// −log P(gold) over target positions; callers divide by position counts.
struct PairTrace {
    Encoded enc;
    std::vector<StepCache> steps;
    std::vector<int> targets; // extended ids, EOS-terminated
    double loss_sum = 0;
};

inline PairTrace pair_forward(const PointerGenModel& m, const SourceEncoding& src,
                              const std::vector<int>& targets) {
    if (targets.empty()) throw DataError("target sequence is empty");
    PairTrace t;
    t.enc = encode(m, src);
    t.targets = targets;
    t.steps.resize(targets.size());
    Eigen::VectorXd h = t.enc.h0, c = t.enc.c0;
    int prev = kSos;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto& k = t.steps[i];
        detail::decoder_step(m, t.enc, prev, h, c, k);
        int gold = targets[i];
        if (gold < 0 || gold >= t.enc.extended_size)
            throw DataError("target id " + std::to_string(gold) + " outside the extended vocabulary");
        t.loss_sum += -std::log(std::max(k.dist(gold), kProbFloor));
        h = k.lstm.h;
        c = k.lstm.c;
        prev = gold;
    }
    if (!std::isfinite(t.loss_sum)) throw NaNGuard("non-finite loss in forward pass");
    return t;
}

// zero-filled tensor mirror for gradient accumulation
inline PointerGenModel zero_like(const PointerGenModel& m) {
    PointerGenModel z = m;
    z.vocab = Vocab{};
    z.for_each_tensor([](const std::string&, Eigen::MatrixXd& t) { t.setZero(); });
    return z;
}

// Backward pass of pair_forward; every position's loss gradient is scaled
// by `scale` (1/positions gives the batch-mean convention). Accumulates
// into g, which must be zero_like-shaped.
inline void pair_backward(const PointerGenModel& m, const PairTrace& t, double scale, PointerGenModel& g) {
    const int L = int(t.enc.src_ids.size());
    const int D = m.config.dec_hidden;
    const int S = m.state_width();
    const int V = m.vocab.size();

    std::vector<Eigen::VectorXd> dstates(std::size_t(L), Eigen::VectorXd::Zero(S));
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(D), dc_next = Eigen::VectorXd::Zero(D);

    for (int step = int(t.steps.size()) - 1; step >= 0; --step) {
        const StepCache& k = t.steps[std::size_t(step)];
        int gold = t.targets[std::size_t(step)];
        double p = k.dist(gold);
        double dp = p > kProbFloor ? -scale / p : 0.0; // floored positions carry no gradient

        // mixture: split dp between the generate and copy paths
        double copy_mass = 0.0;
        Eigen::VectorXd da = Eigen::VectorXd::Zero(L);
        for (int i = 0; i < L; ++i)
            if (t.enc.src_ids[std::size_t(i)] == gold) {
                da(i) += dp * (1.0 - k.p_gen);
                copy_mass += k.attn.weights(i);
            }
        double dpgen = -dp * copy_mass;
        Eigen::VectorXd dpv = Eigen::VectorXd::Zero(V);
        if (gold < V) {
            dpv(gold) = dp * k.p_gen;
            dpgen += dp * k.pv(gold);
        }

        // vocabulary softmax and output projection
        Eigen::VectorXd dlogits = (k.pv.array() * (dpv.array() - k.pv.dot(dpv))).matrix();
        Eigen::VectorXd sc(D + S);
        sc.head(D) = k.lstm.h;
        sc.tail(S) = k.attn.ctx;
        g.out_W.noalias() += dlogits * sc.transpose();
        g.out_b.col(0) += dlogits;
        Eigen::VectorXd dsc = m.out_W.transpose() * dlogits;
        Eigen::VectorXd ds = dsc.head(D);
        Eigen::VectorXd dctx = dsc.tail(S);

        // generation probability
        Eigen::VectorXd x = m.embed.row(k.x_id).transpose();
        double du = dpgen * k.p_gen * (1.0 - k.p_gen);
        g.pgen_wc.col(0) += du * k.attn.ctx;
        dctx += du * m.pgen_wc.col(0);
        g.pgen_ws.col(0) += du * k.lstm.h;
        ds += du * m.pgen_ws.col(0);
        g.pgen_wx.col(0) += du * x;
        Eigen::VectorXd dx_extra = du * m.pgen_wx.col(0);
        g.pgen_b(0, 0) += du;

        // attention: context path plus the copy path's direct weight use
        for (int i = 0; i < L; ++i) {
            da(i) += dctx.dot(t.enc.states[std::size_t(i)]);
            dstates[std::size_t(i)] += k.attn.weights(i) * dctx;
        }
        Eigen::VectorXd de = (k.attn.weights.array() * (da.array() - k.attn.weights.dot(da))).matrix();
        Eigen::VectorXd dws_sum = Eigen::VectorXd::Zero(m.config.attn_dim);
        for (int i = 0; i < L; ++i) {
            g.attn_v.col(0) += de(i) * k.attn.u.col(i);
            Eigen::VectorXd dz = (de(i) * m.attn_v.col(0).array() * (1.0 - k.attn.u.col(i).array().square())).matrix();
            g.attn_Wh.noalias() += dz * t.enc.states[std::size_t(i)].transpose();
            dstates[std::size_t(i)].noalias() += m.attn_Wh.transpose() * dz;
            g.attn_b.col(0) += dz;
            dws_sum += dz;
        }
        g.attn_Ws.noalias() += dws_sum * k.lstm.h.transpose();
        ds.noalias() += m.attn_Ws.transpose() * dws_sum;

        // decoder cell
        Eigen::VectorXd dx, dh_prev, dc_prev;
        detail::lstm_backward(m.dec, k.lstm, ds + dh_next, dc_next, g.dec, dx, dh_prev, dc_prev);
        dx += dx_extra;
        g.embed.row(k.x_id) += dx.transpose();
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    // bridge
    Eigen::VectorXd dbh = (dh_next.array() * (1.0 - t.enc.h0.array().square())).matrix();
    Eigen::VectorXd dbc = (dc_next.array() * (1.0 - t.enc.c0.array().square())).matrix();
    g.bridge_h_W.noalias() += dbh * t.enc.bridge_h_in.transpose();
    g.bridge_h_b.col(0) += dbh;
    g.bridge_c_W.noalias() += dbc * t.enc.bridge_c_in.transpose();
    g.bridge_c_b.col(0) += dbc;
    Eigen::VectorXd dfin_h = m.bridge_h_W.transpose() * dbh;
    Eigen::VectorXd dfin_c = m.bridge_c_W.transpose() * dbc;

    // encoder, top layer down; dstates split into direction halves
    const int H = m.config.enc_hidden;
    auto dh_f = std::vector<Eigen::VectorXd>(std::size_t(L));
    auto dh_b = std::vector<Eigen::VectorXd>(std::size_t(L));
    for (int i = 0; i < L; ++i) {
        dh_f[std::size_t(i)] = dstates[std::size_t(i)].head(H);
        dh_b[std::size_t(i)] = dstates[std::size_t(i)].tail(H);
    }
    Eigen::VectorXd dcfin_f = dfin_c.head(H), dcfin_b = dfin_c.tail(H);
    dh_f[std::size_t(L - 1)] += dfin_h.head(H);
    dh_b[0] += dfin_h.tail(H);

    for (int l = m.config.enc_layers - 1; l >= 0; --l) {
        const auto& fl = t.enc.fwd[std::size_t(l)];
        const auto& bl = t.enc.bwd[std::size_t(l)];
        int in_width = int(fl[0].x.size());
        std::vector<Eigen::VectorXd> dinput(std::size_t(L), Eigen::VectorXd::Zero(in_width));

        Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(H);
        Eigen::VectorXd dc_carry = l == m.config.enc_layers - 1 ? dcfin_f : Eigen::VectorXd::Zero(H).eval();
        for (int i = L - 1; i >= 0; --i) {
            Eigen::VectorXd dx, dh_prev, dc_prev;
            detail::lstm_backward(m.enc_fwd[std::size_t(l)], fl[std::size_t(i)],
                                  dh_f[std::size_t(i)] + dh_carry, dc_carry, g.enc_fwd[std::size_t(l)], dx,
                                  dh_prev, dc_prev);
            dinput[std::size_t(i)] += dx;
            dh_carry = dh_prev;
            dc_carry = dc_prev;
        }
        dh_carry.setZero();
        dc_carry = l == m.config.enc_layers - 1 ? dcfin_b : Eigen::VectorXd::Zero(H).eval();
        for (int i = 0; i < L; ++i) {
            Eigen::VectorXd dx, dh_prev, dc_prev;
            detail::lstm_backward(m.enc_bwd[std::size_t(l)], bl[std::size_t(i)],
                                  dh_b[std::size_t(i)] + dh_carry, dc_carry, g.enc_bwd[std::size_t(l)], dx,
                                  dh_prev, dc_prev);
            dinput[std::size_t(i)] += dx;
            dh_carry = dh_prev;
            dc_carry = dc_prev;
        }

        if (l == 0) {
            for (int i = 0; i < L; ++i)
                g.embed.row(feed_id(m, t.enc.src_ids[std::size_t(i)])) += dinput[std::size_t(i)].transpose();
        } else {
            for (int i = 0; i < L; ++i) {
                dh_f[std::size_t(i)] = dinput[std::size_t(i)].head(H);
                dh_b[std::size_t(i)] = dinput[std::size_t(i)].tail(H);
            }
        }
    }
}

inline bool all_finite(const PointerGenModel& m) {
    bool ok = true;
    m.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) {
        if (!t.allFinite()) ok = false;
    });
    return ok;
}

inline constexpr char kModelMagic[] = "radannot-model";

inline void save_model(std::ostream& os, const PointerGenModel& m, const TrainConfig& tc) {
    io::write_string(os, kModelMagic);
    io::write_u32(os, 1); // version
    io::write_u32(os, std::uint32_t(m.config.embed_dim));
    io::write_u32(os, std::uint32_t(m.config.enc_hidden));
    io::write_u32(os, std::uint32_t(m.config.enc_layers));
    io::write_u32(os, std::uint32_t(m.config.dec_hidden));
    io::write_u32(os, std::uint32_t(m.config.attn_dim));
    save_vocab(os, m.vocab);
    io::write_f64(os, tc.learning_rate);
    io::write_u32(os, std::uint32_t(tc.batch_size));
    io::write_f64(os, tc.grad_clip_norm);
    io::write_u32(os, std::uint32_t(tc.beam_size));
    io::write_u32(os, std::uint32_t(tc.max_decode_len));
    io::write_u32(os, std::uint32_t(tc.epochs));
    io::write_u64(os, tc.seed);
    io::write_u32(os, std::uint32_t(tc.min_token_freq));
    m.for_each_tensor([&](const std::string& name, const Eigen::MatrixXd& t) {
        io::write_string(os, name);
        io::write_u32(os, std::uint32_t(t.rows()));
        io::write_u32(os, std::uint32_t(t.cols()));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) io::write_f32(os, float(t(r, c)));
    });
}

inline PointerGenModel load_model(std::istream& is, TrainConfig* out_tc = nullptr) {
    if (io::read_string(is) != kModelMagic) throw DataError("not a model file");
    std::uint32_t version = io::read_u32(is);
    if (version != 1) throw DataError("unsupported model file version " + std::to_string(version));
    ModelConfig cfg;
    cfg.embed_dim = int(io::read_u32(is));
    cfg.enc_hidden = int(io::read_u32(is));
    cfg.enc_layers = int(io::read_u32(is));
    cfg.dec_hidden = int(io::read_u32(is));
    cfg.attn_dim = int(io::read_u32(is));
    Vocab vocab = load_vocab(is);
    TrainConfig tc;
    tc.learning_rate = io::read_f64(is);
    tc.batch_size = int(io::read_u32(is));
    tc.grad_clip_norm = io::read_f64(is);
    tc.beam_size = int(io::read_u32(is));
    tc.max_decode_len = int(io::read_u32(is));
    tc.epochs = int(io::read_u32(is));
    tc.seed = io::read_u64(is);
    tc.min_token_freq = int(io::read_u32(is));
    if (out_tc) *out_tc = tc;

    PointerGenModel m = init_model(vocab, cfg, 1);
    m.for_each_tensor([&](const std::string& name, Eigen::MatrixXd& t) {
        if (io::read_string(is) != name) throw DataError("model file tensor order mismatch at " + name);
        std::uint32_t rows = io::read_u32(is), cols = io::read_u32(is);
        if (rows != std::uint32_t(t.rows()) || cols != std::uint32_t(t.cols()))
            throw DataError("model file tensor shape mismatch at " + name);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c) t(r, c) = io::read_f32(is);
    });
    if (!all_finite(m)) throw NaNGuard("model file holds non-finite parameters");
    return m;
}

} // namespace radannot::seq2seq
