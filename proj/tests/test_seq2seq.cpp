#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "radannot/seq2seq/train.hpp"
#include "radannot/synth.hpp"

using namespace radannot;
using namespace radannot::seq2seq;
using Catch::Approx;

namespace {

Vocab tiny_vocab(std::vector<std::string> words) {
    std::vector<std::vector<std::string>> seqs = {std::move(words)};
    return build_vocab(seqs);
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.embed_dim = 4;
    c.enc_hidden = 2;
    c.enc_layers = 2;
    c.dec_hidden = 4;
    c.attn_dim = 4;
    return c;
}

} // namespace

TEST_CASE("reserved token block has fixed ids and surfaces") {
    Vocab v = tiny_vocab({"cardiomegaly"});
    CHECK(v.token_of(kPad) == "<pad>");
    CHECK(v.token_of(kSos) == "<s>");
    CHECK(v.token_of(kEos) == ".");
    CHECK(v.token_of(kUnk) == "<unk>");
    CHECK(v.token_of(kSlash) == "/");
    CHECK(v.token_of(kAnnSep) == "<sep>");
    CHECK(v.id_of(".") == kEos);
    CHECK(v.id_of("/") == kSlash);
    CHECK(v.id_of("cardiomegaly") == kNumSpecials);
    CHECK(v.id_of("never seen") == kUnk);
}

TEST_CASE("vocabulary orders words by frequency then lexicographically") {
    std::vector<std::vector<std::string>> seqs = {
        {"lung", "lung", "lung", "base", "base", "apex"},
        {"apex", "base"},
    };
    Vocab v = build_vocab(seqs);
    CHECK(v.size() == kNumSpecials + 3);
    CHECK(v.id_of("base") == kNumSpecials);     // 3 occurrences, earlier lexicographically
    CHECK(v.id_of("lung") == kNumSpecials + 1); // 3 occurrences
    CHECK(v.id_of("apex") == kNumSpecials + 2); // 2 occurrences

    Vocab filtered = build_vocab(seqs, 3);
    CHECK(filtered.contains("lung"));
    CHECK(filtered.contains("base"));
    CHECK_FALSE(filtered.contains("apex"));
}

TEST_CASE("words spelled like reserved surfaces never get a second id") {
    std::vector<std::vector<std::string>> seqs = {{"lung", ".", "/", "<unk>"}};
    Vocab v = build_vocab(seqs);
    CHECK(v.size() == kNumSpecials + 1);
    CHECK(v.id_of(".") == kEos);
}

TEST_CASE("vocabulary round-trips through its binary form") {
    Vocab v = tiny_vocab({"effusion", "lung", "effusion"});
    std::stringstream buf;
    save_vocab(buf, v);
    Vocab r = load_vocab(buf);
    CHECK(r.tokens == v.tokens);
    CHECK(r.id_of("effusion") == v.id_of("effusion"));
}

TEST_CASE("source encoding assigns copy slots to unknown words in first-occurrence order") {
    Vocab v = tiny_vocab({"the", "lung"});
    SourceEncoding src = encode_source(v, {"the", "qqq", "lung", "zzz", "qqq"});
    CHECK(src.base_size == v.size());
    CHECK(src.ids[0] == v.id_of("the"));
    CHECK(src.ids[1] == v.size());     // first unknown
    CHECK(src.ids[3] == v.size() + 1); // second unknown
    CHECK(src.ids[4] == src.ids[1]);   // repeat shares its slot
    CHECK(src.extended_size() == v.size() + 2);
    CHECK(src.token_of(v, src.ids[1]) == "qqq");
    CHECK(src.token_of(v, src.ids[3]) == "zzz");
    CHECK(src.token_of(v, src.ids[0]) == "the");
}

TEST_CASE("target construction renders annotations as words with separators") {
    Vocab v = tiny_vocab({"cardiomegaly", "severe", "effusion", "left", "lung"});
    SourceEncoding src = encode_source(v, {"lung"});

    SECTION("single annotation ends with the terminal") {
        std::vector<corpus::Annotation> anns = {corpus::parse_annotation("Cardiomegaly/severe")};
        std::vector<int> t = build_targets(v, src, anns);
        REQUIRE(t.size() == 4);
        CHECK(t[0] == v.id_of("cardiomegaly"));
        CHECK(t[1] == kSlash);
        CHECK(t[2] == v.id_of("severe"));
        CHECK(t[3] == kEos);
    }
    SECTION("no annotations leaves the bare terminal") {
        std::vector<int> t = build_targets(v, src, {});
        CHECK(t == std::vector<int>{kEos});
    }
    SECTION("two annotations are separated") {
        std::vector<corpus::Annotation> anns = {corpus::parse_annotation("effusion/left"),
                                                corpus::parse_annotation("cardiomegaly")};
        std::vector<int> t = build_targets(v, src, anns);
        std::vector<int> want = {v.id_of("effusion"), kSlash, v.id_of("left"), kAnnSep,
                                 v.id_of("cardiomegaly"), kEos};
        CHECK(t == want);
    }
    SECTION("multiword terms flatten to their words") {
        std::vector<corpus::Annotation> anns = {corpus::parse_annotation("left lung/severe")};
        std::vector<int> t = build_targets(v, src, anns);
        std::vector<int> want = {v.id_of("left"), v.id_of("lung"), kSlash, v.id_of("severe"), kEos};
        CHECK(t == want);
    }
    SECTION("unknown gold word takes its copy slot when the source holds it") {
        SourceEncoding s2 = encode_source(v, {"qqq", "lung"});
        std::vector<corpus::Annotation> anns = {corpus::parse_annotation("qqq")};
        std::vector<int> t = build_targets(v, s2, anns);
        CHECK(t[0] == v.size());
        CHECK(t[1] == kEos);
    }
    SECTION("unknown gold word absent from the source falls back to UNK") {
        std::vector<corpus::Annotation> anns = {corpus::parse_annotation("qqq")};
        std::vector<int> t = build_targets(v, src, anns);
        CHECK(t[0] == kUnk);
    }
}

TEST_CASE("model construction checks dimensions and seeds deterministically") {
    Vocab v = tiny_vocab({"a", "b", "c"});

    SECTION("decoder width must cover both encoder directions") {
        ModelConfig c = tiny_config();
        c.dec_hidden = 5;
        CHECK_THROWS_AS(init_model(v, c, 1), BadConfig);
    }
    SECTION("shapes follow the configuration") {
        PointerGenModel m = init_model(v, tiny_config(), 1);
        CHECK(m.embed.rows() == v.size());
        CHECK(m.embed.cols() == 4);
        CHECK(m.enc_fwd.size() == 2);
        CHECK(m.enc_fwd[0].W.cols() == 4);  // embeddings in
        CHECK(m.enc_fwd[1].W.cols() == 4);  // both directions of the layer below
        CHECK(m.dec.U.rows() == 16);
        CHECK(m.out_W.rows() == v.size());
        CHECK(m.out_W.cols() == 8); // decoder state plus context
        CHECK(all_finite(m));
    }
    SECTION("same seed gives identical parameters") {
        PointerGenModel a = init_model(v, tiny_config(), 7);
        PointerGenModel b = init_model(v, tiny_config(), 7);
        bool same = true;
        a.for_each_tensor([&](const std::string& name, const Eigen::MatrixXd& t) {
            Eigen::MatrixXd other;
            b.for_each_tensor([&](const std::string& n2, const Eigen::MatrixXd& t2) {
                if (n2 == name) other = t2;
            });
            if (t.rows() != other.rows() || (t.array() != other.array()).any()) same = false;
        });
        CHECK(same);
        PointerGenModel d = init_model(v, tiny_config(), 8);
        CHECK((a.embed.array() != d.embed.array()).any());
    }
}

TEST_CASE("encoder emits one double-width state per source position") {
    Vocab v = tiny_vocab({"low", "lung", "volumes"});
    PointerGenModel m = init_model(v, tiny_config(), 3);
    SourceEncoding src = encode_source(v, {"low", "lung", "volumes"});
    Encoded e = encode(m, src);
    REQUIRE(e.states.size() == 3);
    for (const auto& s : e.states) CHECK(s.size() == 4);
    CHECK(e.h0.size() == 4);
    CHECK(e.c0.size() == 4);

    Encoded e2 = encode(m, src);
    for (std::size_t i = 0; i < 3; ++i) CHECK(e.states[i] == e2.states[i]);

    SECTION("empty source is rejected") {
        SourceEncoding empty;
        empty.base_size = v.size();
        CHECK_THROWS_AS(encode(m, empty), EmptySource);
    }
    SECTION("zeroed parameters collapse every state to the same point") {
        PointerGenModel z = zero_like(m);
        z.vocab = v;
        Encoded ez = encode(z, src);
        CHECK(ez.states[0] == ez.states[1]);
        CHECK(ez.states[1] == ez.states[2]);
    }
}

TEST_CASE("attention weights form a distribution over source positions") {
    Vocab v = tiny_vocab({"a", "b", "c", "d"});
    PointerGenModel m = init_model(v, tiny_config(), 11);
    SourceEncoding src = encode_source(v, {"a", "b", "c", "d"});
    Encoded e = encode(m, src);

    Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(4, -0.3, 0.4);
    AttnCache a = attend(m, e.states, s);
    CHECK(a.weights.size() == 4);
    CHECK(a.weights.sum() == Approx(1.0).margin(1e-9));
    CHECK(a.weights.minCoeff() > 0.0);
    CHECK(a.ctx.size() == 4);

    SECTION("single position takes all the weight") {
        std::vector<Eigen::VectorXd> one = {e.states[0]};
        AttnCache a1 = attend(m, one, s);
        REQUIRE(a1.weights.size() == 1);
        CHECK(a1.weights(0) == Approx(1.0).margin(1e-12));
    }
    SECTION("identical states split the weight evenly") {
        std::vector<Eigen::VectorXd> twin = {e.states[2], e.states[2]};
        AttnCache a2 = attend(m, twin, s);
        CHECK(a2.weights(0) == 0.5);
        CHECK(a2.weights(1) == 0.5);
    }
}

TEST_CASE("generate/copy mixture distributes mass per the formula") {
    // base vocabulary of 4, source positions holding ids 1, 2, and one copy slot
    Eigen::VectorXd pv(4);
    pv << 0.1, 0.4, 0.3, 0.2;
    Eigen::VectorXd attn(3);
    attn << 0.4, 0.35, 0.25;
    std::vector<int> src = {1, 4, 2};

    SECTION("pure generation reproduces the vocabulary distribution") {
        Eigen::VectorXd d = final_distribution(pv, attn, 1.0, src, 5);
        REQUIRE(d.size() == 5);
        for (int i = 0; i < 4; ++i) CHECK(d(i) == pv(i));
        CHECK(d(4) == 0.0); // copy slot untouched by the vocabulary path
    }
    SECTION("pure copying puts mass only on source tokens") {
        Eigen::VectorXd d = final_distribution(pv, attn, 0.0, src, 5);
        CHECK(d(0) == 0.0);
        CHECK(d(1) == Approx(0.4));
        CHECK(d(2) == Approx(0.25));
        CHECK(d(3) == 0.0);
        CHECK(d(4) == Approx(0.35));
    }
    SECTION("unknown source token with attention 0.4 at mixture 0.5 scores 0.2") {
        Eigen::VectorXd a2(3);
        a2 << 0.4, 0.4, 0.2;
        std::vector<int> s2 = {1, 4, 2};
        Eigen::VectorXd d = final_distribution(pv, a2, 0.5, s2, 5);
        CHECK(d(4) == Approx(0.2).margin(1e-12));
    }
    SECTION("repeated source token accumulates its attention") {
        std::vector<int> s3 = {2, 2, 2};
        Eigen::VectorXd d = final_distribution(pv, attn, 0.0, s3, 5);
        CHECK(d(2) == Approx(1.0).margin(1e-12));
    }
    SECTION("mixture always sums to one") {
        Rng rng(21);
        for (int trial = 0; trial < 200; ++trial) {
            int V = 2 + int(rng.below(6));
            int L = 1 + int(rng.below(5));
            int ext = V + int(rng.below(3));
            Eigen::VectorXd pvr(V), ar(L);
            for (int i = 0; i < V; ++i) pvr(i) = rng.uniform() + 1e-3;
            for (int i = 0; i < L; ++i) ar(i) = rng.uniform() + 1e-3;
            pvr /= pvr.sum();
            ar /= ar.sum();
            auto ids = std::vector<int>(std::size_t(L));
            for (auto& id : ids) id = int(rng.below(std::uint64_t(ext)));
            double pg = rng.uniform();
            Eigen::VectorXd d = final_distribution(pvr, ar, pg, ids, ext);
            CHECK(d.sum() == Approx(1.0).margin(1e-6));
            CHECK(d.minCoeff() >= 0.0);
        }
    }
    SECTION("shape mismatches are rejected") {
        CHECK_THROWS_AS(final_distribution(pv, attn, 0.5, {1, 2}, 5), DimensionMismatch);
        CHECK_THROWS_AS(final_distribution(pv, attn, 0.5, src, 3), DimensionMismatch);
        CHECK_THROWS_AS(final_distribution(pv, attn, 0.5, {1, 9, 2}, 5), DimensionMismatch);
    }
}

TEST_CASE("decoder steps emit normalized distributions and a valid mixture weight") {
    Vocab v = tiny_vocab({"mild", "cardiomegaly", "noted"});
    PointerGenModel m = init_model(v, tiny_config(), 5);
    SourceEncoding src = encode_source(v, {"mild", "cardiomegaly", "xyzzy"});
    Encoded e = encode(m, src);

    Eigen::VectorXd h = e.h0, c = e.c0;
    int prev = kSos;
    for (int t = 0; t < 4; ++t) {
        DecodeStep step = decode_step(m, e, prev, h, c);
        REQUIRE(step.dist.size() == e.extended_size);
        CHECK(step.dist.sum() == Approx(1.0).margin(1e-6));
        CHECK(step.dist.minCoeff() >= 0.0);
        CHECK(step.attn.sum() == Approx(1.0).margin(1e-6));
        CHECK(step.p_gen > 0.0);
        CHECK(step.p_gen < 1.0);
        prev = 0;
        for (int i = 1; i < int(step.dist.size()); ++i)
            if (step.dist(i) > step.dist(prev)) prev = i;
        h = step.h;
        c = step.c;
    }
}

TEST_CASE("an unknown source word is reachable only through the copy path") {
    Vocab v = tiny_vocab({"the", "heart", "is", "enlarged"});
    PointerGenModel m = init_model(v, tiny_config(), 9);
    SourceEncoding src = encode_source(v, {"the", "xenograft", "is", "enlarged"});
    REQUIRE(src.oov_words.size() == 1);
    int slot = v.size();

    SECTION("mixture below one leaves the slot reachable") {
        m.pgen_b(0, 0) = -30.0; // forces the mixture toward copying
        Encoded e = encode(m, src);
        DecodeStep step = decode_step(m, e, kSos, e.h0, e.c0);
        CHECK(step.p_gen < 1e-9);
        CHECK(step.dist(slot) > 0.0);
    }
    SECTION("pure generation assigns the slot exactly zero") {
        Encoded e = encode(m, src);
        StepCache k;
        seq2seq::detail::decoder_step(m, e, kSos, e.h0, e.c0, k);
        Eigen::VectorXd d = final_distribution(k.pv, k.attn.weights, 1.0, e.src_ids, e.extended_size);
        CHECK(d(slot) == 0.0);
    }
    SECTION("pure copying reaches only source positions") {
        Encoded e = encode(m, src);
        StepCache k;
        seq2seq::detail::decoder_step(m, e, kSos, e.h0, e.c0, k);
        Eigen::VectorXd d = final_distribution(k.pv, k.attn.weights, 0.0, e.src_ids, e.extended_size);
        for (int id = 0; id < int(d.size()); ++id) {
            bool in_source = false;
            for (int sid : e.src_ids) in_source = in_source || sid == id;
            if (!in_source) CHECK(d(id) == 0.0);
        }
    }
}

TEST_CASE("teacher-forced loss matches rigged distributions") {
    Vocab v = tiny_vocab({"a", "b", "c"});
    PointerGenModel m = init_model(v, tiny_config(), 2);
    SourceEncoding src = encode_source(v, {"a", "b"});

    SECTION("near-certain gold probability gives near-zero loss") {
        PointerGenModel r = zero_like(m);
        r.vocab = v;
        r.pgen_b(0, 0) = 50.0;    // pure generation
        r.out_b(kEos, 0) = 50.0;  // all vocabulary mass on the terminal
        PairTrace t = pair_forward(r, src, {kEos});
        CHECK(t.loss_sum == Approx(0.0).margin(1e-9));
    }
    SECTION("uniform vocabulary distribution costs log V per position") {
        PointerGenModel r = zero_like(m);
        r.vocab = v;
        r.pgen_b(0, 0) = 50.0; // pure generation, uniform output head
        PairTrace t = pair_forward(r, src, {v.id_of("a"), kEos});
        CHECK(t.loss_sum == Approx(2.0 * std::log(double(v.size()))).margin(1e-9));
    }
    SECTION("empty target is rejected") {
        CHECK_THROWS_AS(pair_forward(m, src, {}), DataError);
    }
    SECTION("target id outside the extended vocabulary is rejected") {
        CHECK_THROWS_AS(pair_forward(m, src, {v.size() + 5}), DataError);
    }
}

TEST_CASE("analytic gradients match central finite differences on a miniature model") {
    Vocab v = tiny_vocab({"mild", "cardiomegaly", "in", "the", "left", "base", "severe"});
    PointerGenModel model = init_model(v, tiny_config(), 17);

    // two pairs: one with a copy-slot gold and two annotations, one negative
    SourceEncoding s1 = encode_source(v, {"mild", "cardiomegaly", "blorp", "left", "base"});
    std::vector<int> t1 = {v.id_of("cardiomegaly"), kSlash, v.id_of("mild"), kAnnSep,
                           v.size(), kSlash, v.id_of("left"), kEos}; // v.size() = blorp's slot
    SourceEncoding s2 = encode_source(v, {"the", "left", "base"});
    std::vector<int> t2 = {kEos};

    const double scale = 1.0 / double(t1.size() + t2.size());
    auto total_loss = [&](const PointerGenModel& m) {
        return scale * (pair_forward(m, s1, t1).loss_sum + pair_forward(m, s2, t2).loss_sum);
    };

    PointerGenModel grads = zero_like(model);
    pair_backward(model, pair_forward(model, s1, t1), scale, grads);
    pair_backward(model, pair_forward(model, s2, t2), scale, grads);

    std::vector<Eigen::MatrixXd*> params, analytic;
    std::vector<std::string> names;
    model.for_each_tensor([&](const std::string& n, Eigen::MatrixXd& t) {
        names.push_back(n);
        params.push_back(&t);
    });
    grads.for_each_tensor([&](const std::string&, Eigen::MatrixXd& t) { analytic.push_back(&t); });

    const double h = 1e-5;
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        Eigen::MatrixXd& p = *params[ti];
        double worst = 0;
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) {
                double keep = p(r, c);
                p(r, c) = keep + h;
                double up = total_loss(model);
                p(r, c) = keep - h;
                double down = total_loss(model);
                p(r, c) = keep;
                double numeric = (up - down) / (2 * h);
                double a = (*analytic[ti])(r, c);
                double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
                worst = std::max(worst, rel);
            }
        INFO(names[ti]);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("training drives the loss down and is reproducible") {
    synth::SynthConfig sc;
    sc.seed = 5;
    sc.n_reports = 4;
    sc.min_sentences = 2;
    sc.max_sentences = 3;
    synth::SynthCorpus corpus = synth::generate(sc);

    Vocab v = vocab_from_reports(corpus.reports);
    std::vector<Example> xs = make_examples(v, corpus.reports, corpus.ground_truth);
    REQUIRE(!xs.empty());

    ModelConfig mc;
    mc.embed_dim = 8;
    mc.enc_hidden = 4;
    mc.enc_layers = 2;
    mc.dec_hidden = 8;

    TrainConfig tc;
    tc.learning_rate = 0.005;
    tc.batch_size = 4;
    tc.epochs = 12;
    tc.seed = 3;

    SECTION("loss decreases over epochs") {
        PointerGenModel m = init_model(v, mc, 1);
        TrainResult res = train(m, xs, {}, tc);
        REQUIRE(res.train_losses.size() == 12);
        CHECK(res.train_losses.back() < res.train_losses.front());
        CHECK(res.best_epoch >= 0);
        CHECK(all_finite(m));
    }
    SECTION("identical seeds give bitwise-identical trained models") {
        PointerGenModel a = init_model(v, mc, 1);
        PointerGenModel b = init_model(v, mc, 1);
        train(a, xs, {}, tc);
        train(b, xs, {}, tc);
        std::stringstream sa, sb;
        save_model(sa, a, tc);
        save_model(sb, b, tc);
        CHECK(sa.str() == sb.str());
    }
    SECTION("validation retention restores the best epoch's parameters") {
        std::vector<Example> val(xs.begin(), xs.begin() + 2);
        PointerGenModel m = init_model(v, mc, 1);
        TrainResult res = train(m, xs, val, tc);
        double best = *std::min_element(res.val_losses.begin(), res.val_losses.end());
        CHECK(res.best_val_loss == Approx(best));
        CHECK(dataset_loss(m, val) == Approx(res.best_val_loss).margin(1e-12));
    }
    SECTION("an empty training set is rejected") {
        PointerGenModel m = init_model(v, mc, 1);
        CHECK_THROWS_AS(train(m, {}, {}, tc), EmptyTrainingSet);
    }
}

TEST_CASE("example construction covers every sentence with aligned targets") {
    synth::SynthConfig sc;
    sc.seed = 8;
    sc.n_reports = 6;
    synth::SynthCorpus corpus = synth::generate(sc);
    Vocab v = vocab_from_reports(corpus.reports);
    std::vector<Example> xs = make_examples(v, corpus.reports, corpus.ground_truth);

    std::size_t total_sentences = 0;
    for (const auto& r : corpus.reports) total_sentences += corpus::split_sentences(r).size();
    CHECK(xs.size() == total_sentences);

    std::size_t with_annotation = 0, bare = 0;
    for (const auto& x : xs) {
        REQUIRE(!x.targets.empty());
        CHECK(x.targets.back() == kEos);
        if (x.targets.size() == 1)
            ++bare;
        else
            ++with_annotation;
    }
    CHECK(with_annotation == corpus.stats.sentences_with_annotations);
    CHECK(bare == corpus.stats.sentences_without_annotations);

    SECTION("paragraph examples produce one source per report") {
        std::vector<Example> px = make_paragraph_examples(v, corpus.reports);
        CHECK(px.size() == corpus.reports.size());
        for (const auto& x : px) CHECK(x.targets.back() == kEos);
    }
}

TEST_CASE("model files round-trip parameters, vocabulary and training settings") {
    Vocab v = tiny_vocab({"opacity", "basilar", "airspace"});
    PointerGenModel m = init_model(v, tiny_config(), 23);
    TrainConfig tc;
    tc.learning_rate = 0.002;
    tc.epochs = 7;
    tc.seed = 99;

    std::stringstream buf;
    save_model(buf, m, tc);
    TrainConfig rtc;
    PointerGenModel r = load_model(buf, &rtc);

    CHECK(r.vocab.tokens == m.vocab.tokens);
    CHECK(rtc.learning_rate == 0.002);
    CHECK(rtc.epochs == 7);
    CHECK(rtc.seed == 99);

    bool same = true;
    std::vector<const Eigen::MatrixXd*> mt, rt;
    m.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { mt.push_back(&t); });
    r.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { rt.push_back(&t); });
    REQUIRE(mt.size() == rt.size());
    for (std::size_t i = 0; i < mt.size(); ++i) {
        if (mt[i]->rows() != rt[i]->rows() || mt[i]->cols() != rt[i]->cols()) {
            same = false;
            continue;
        }
        // storage is 32-bit; compare at that precision
        if ((mt[i]->cast<float>().array() != rt[i]->cast<float>().array()).any()) same = false;
    }
    CHECK(same);

    SECTION("identical saves are byte-identical") {
        std::stringstream a, b;
        save_model(a, m, tc);
        save_model(b, m, tc);
        CHECK(a.str() == b.str());
    }
    SECTION("corrupt header is rejected") {
        std::stringstream bad;
        bad << "not a model";
        CHECK_THROWS_AS(load_model(bad), DataError);
    }
}
