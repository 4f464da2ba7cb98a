#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <sstream>

#include "radannot/embedding.hpp"

using namespace radannot;
using Catch::Approx;

namespace {

// small corpus: "copd" and "emphysema" share their contexts, "table" does not
std::vector<std::vector<std::string>> context_corpus() {
    std::vector<std::vector<std::string>> streams;
    for (int i = 0; i < 150; ++i) {
        streams.push_back({"the", "patient", "has", "copd"});
        streams.push_back({"the", "patient", "has", "emphysema"});
        streams.push_back({"a", "wooden", "table", "stands"});
    }
    return streams;
}

embed::EmbedConfig small_config() {
    embed::EmbedConfig c;
    c.dim = 32;
    c.buckets = 4096;
    c.epochs = 10;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("training defaults match the conventional settings") {
    embed::EmbedConfig c;
    CHECK(c.dim == 100);
    CHECK(c.window == 5);
    CHECK(c.negative_samples == 5);
    CHECK(c.epochs == 5);
    CHECK(c.min_count == 1);
    CHECK(c.char_ngram_min == 3);
    CHECK(c.char_ngram_max == 6);
    CHECK(c.buckets == 2000000u);
}

TEST_CASE("an empty corpus cannot be trained on") {
    CHECK_THROWS_AS(embed::train_embeddings({}, small_config()), EmptyCorpus);
    std::vector<std::vector<std::string>> empties = {{}, {}};
    CHECK_THROWS_AS(embed::train_embeddings(empties, small_config()), EmptyCorpus);
}

TEST_CASE("all trained vectors have the configured dimension and are finite") {
    embed::EmbedConfig c = small_config();
    c.dim = 100;
    auto table = embed::train_embeddings(context_corpus(), c);
    for (const auto& w : table.words) {
        Eigen::VectorXf v = table.vector(w);
        REQUIRE(v.size() == 100);
        CHECK(v.allFinite());
    }
    CHECK(table.vector("neverseen").size() == 100);
}

TEST_CASE("shared contexts pull words together") {
    auto table = embed::train_embeddings(context_corpus(), small_config());
    double close = embed::cosine(table.vector("copd"), table.vector("emphysema"));
    double far = embed::cosine(table.vector("copd"), table.vector("table"));
    CHECK(close > far);
}

TEST_CASE("unseen words compose from character n-grams") {
    auto table = embed::train_embeddings(context_corpus(), small_config());
    CHECK_FALSE(table.contains("copdd"));
    Eigen::VectorXf v = table.vector("copdd");
    REQUIRE(v.size() == 32);
    CHECK(v.allFinite());
    CHECK(v.norm() > 0.0f);
    double sim = embed::cosine(v, table.vector("copd"));
    CHECK(sim > 0.5);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    auto a = embed::train_embeddings(context_corpus(), small_config());
    auto b = embed::train_embeddings(context_corpus(), small_config());
    REQUIRE(a.words == b.words);
    REQUIRE(a.word_vectors.size() == b.word_vectors.size());
    CHECK(std::memcmp(a.word_vectors.data(), b.word_vectors.data(),
                      sizeof(float) * std::size_t(a.word_vectors.size())) == 0);
    CHECK(std::memcmp(a.bucket_vectors.data(), b.bucket_vectors.data(),
                      sizeof(float) * std::size_t(a.bucket_vectors.size())) == 0);

    embed::EmbedConfig other = small_config();
    other.seed = 4;
    auto c = embed::train_embeddings(context_corpus(), other);
    CHECK(std::memcmp(a.word_vectors.data(), c.word_vectors.data(),
                      sizeof(float) * std::size_t(a.word_vectors.size())) != 0);
}

TEST_CASE("similarity queries are ranked, deduplicated and bounded") {
    embed::EmbeddingTable t;
    t.config.dim = 2;
    t.config.buckets = 16;
    std::vector<std::pair<std::string, std::vector<float>>> entries = {
        {"query", {1.0f, 0.0f}},
        {"twin", {1.0f, 0.0f}},
        {"near", {0.9f, 0.4f}},
        {"off", {0.0f, 1.0f}},
    };
    t.word_vectors.resize(4, 2);
    for (int i = 0; i < 4; ++i) {
        t.words.push_back(entries[std::size_t(i)].first);
        t.vocab[entries[std::size_t(i)].first] = i;
        t.counts.push_back(1);
        t.word_vectors(i, 0) = entries[std::size_t(i)].second[0];
        t.word_vectors(i, 1) = entries[std::size_t(i)].second[1];
    }
    t.bucket_vectors = Eigen::MatrixXf::Zero(16, 2);
    t.finalize();

    SECTION("identical vectors rank first with cosine one") {
        auto top = embed::most_similar(t, "query", 2);
        REQUIRE(top.size() == 2);
        CHECK(top[0].first == "twin");
        CHECK(top[0].second == Approx(1.0));
        CHECK(top[1].first == "near");
    }
    SECTION("the query itself never appears") {
        for (auto& [w, s] : embed::most_similar(t, "query", 10)) CHECK(w != "query");
    }
    SECTION("k beyond the vocabulary truncates to vocab minus one") {
        CHECK(embed::most_similar(t, "query", 10).size() == 3);
    }
    SECTION("scores are non-increasing") {
        auto top = embed::most_similar(t, "near", 10);
        for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].second >= top[i].second);
    }
}

TEST_CASE("embedding tables survive the file round trip") {
    auto table = embed::train_embeddings(context_corpus(), small_config());
    std::ostringstream os(std::ios::binary);
    embed::save_embeddings(os, table);
    std::istringstream is(os.str(), std::ios::binary);
    auto back = embed::load_embeddings(is);

    CHECK(back.config.dim == table.config.dim);
    CHECK(back.config.buckets == table.config.buckets);
    CHECK(back.words == table.words);
    CHECK(back.counts == table.counts);
    REQUIRE(back.word_vectors.size() == table.word_vectors.size());
    CHECK(std::memcmp(back.word_vectors.data(), table.word_vectors.data(),
                      sizeof(float) * std::size_t(table.word_vectors.size())) == 0);
    CHECK(std::memcmp(back.bucket_vectors.data(), table.bucket_vectors.data(),
                      sizeof(float) * std::size_t(table.bucket_vectors.size())) == 0);

    // composed lookups behave identically, out-of-vocabulary included
    for (const auto& w : {"copd", "emphysema", "copdd", "zzz"}) {
        Eigen::VectorXf v1 = table.vector(w);
        Eigen::VectorXf v2 = back.vector(w);
        CHECK((v1 - v2).norm() == Approx(0.0f));
    }
}

TEST_CASE("corrupt embedding files are rejected") {
    std::istringstream empty("");
    CHECK_THROWS_AS(embed::load_embeddings(empty), DataError);
    std::istringstream junk("NOPE this is not an embedding file");
    CHECK_THROWS_AS(embed::load_embeddings(junk), DataError);
}
