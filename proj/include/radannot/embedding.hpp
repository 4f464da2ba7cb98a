#pragma once

// Subword-aware word embeddings: skip-gram with negative sampling over
// words plus hashed character n-grams. A word's vector is its word row
// plus the rows of its character n-gram buckets; out-of-vocabulary words
// fall back to the mean of their bucket rows, so lookups never fail.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "radannot/common.hpp"

namespace radannot::embed {

struct EmbedConfig {
    int dim = 100;
    int min_count = 1;
    int char_ngram_min = 3;
    int char_ngram_max = 6;
    int window = 5;
    int negative_samples = 5;
    int epochs = 5;
    std::uint32_t buckets = 2'000'000;
    float learning_rate = 0.05f;
    std::uint64_t seed = 1;
};

namespace detail {

inline std::uint32_t ngram_bucket(const std::string& g, std::uint32_t buckets) {
    // FNV-1a 32 bit, the usual subword hash
    std::uint32_t h = 2166136261u;
    for (unsigned char c : g) {
        h ^= c;
        h *= 16777619u;
    }
    return h % buckets;
}

inline std::vector<std::uint32_t> char_ngram_buckets(const std::string& word, int nmin, int nmax,
                                                     std::uint32_t buckets) {
    std::string padded = "<" + word + ">";
    std::vector<std::uint32_t> out;
    int len = int(padded.size());
    for (int n = nmin; n <= nmax; ++n) {
        if (n > len) break;
        for (int i = 0; i + n <= len; ++i) out.push_back(ngram_bucket(padded.substr(std::size_t(i), std::size_t(n)), buckets));
    }
    return out;
}

inline float sigmoidf(float x) {
    if (x > 8.0f) return 1.0f;
    if (x < -8.0f) return 0.0f;
    return 1.0f / (1.0f + std::exp(-x));
}

} // namespace detail

class EmbeddingTable {
public:
    EmbedConfig config;
    std::vector<std::string> words;                 // row index -> word
    std::unordered_map<std::string, int> vocab;     // word -> row index
    std::vector<std::int64_t> counts;               // training frequency per word
    Eigen::MatrixXf word_vectors;                   // |vocab| x dim
    Eigen::MatrixXf bucket_vectors;                 // buckets x dim

    int dim() const { return config.dim; }

    bool contains(const std::string& w) const { return vocab.count(w) > 0; }

    std::vector<std::uint32_t> subword_buckets_of(const std::string& w) const {
        return detail::char_ngram_buckets(w, config.char_ngram_min, config.char_ngram_max, config.buckets);
    }

    // In-vocab: word row plus the sum of its n-gram bucket rows.
    // Out-of-vocab: mean of the n-gram bucket rows.
    Eigen::VectorXf vector(const std::string& w) const {
        auto it = vocab.find(w);
        if (it != vocab.end()) return composed_.row(it->second).transpose();
        Eigen::VectorXf v = Eigen::VectorXf::Zero(config.dim);
        auto bs = subword_buckets_of(w);
        if (bs.empty()) return v;
        for (auto b : bs) v += bucket_vectors.row(b).transpose();
        v /= float(bs.size());
        return v;
    }

    // Called once after training or loading; precomputes composed rows.
    void finalize() {
        composed_.resize(int(words.size()), config.dim);
        for (int w = 0; w < int(words.size()); ++w) {
            Eigen::RowVectorXf v = word_vectors.row(w);
            for (auto b : subword_buckets_of(words[std::size_t(w)])) v += bucket_vectors.row(b);
            composed_.row(w) = v;
        }
    }

    const Eigen::MatrixXf& composed() const { return composed_; }

private:
    Eigen::MatrixXf composed_;
};

template <class VecA, class VecB>
double cosine(const VecA& u, const VecB& v) {
    if (u.size() != v.size())
        throw DimensionMismatch("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()));
    double nu = double(u.norm());
    double nv = double(v.norm());
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return double(u.template cast<double>().dot(v.template cast<double>())) / (nu * nv);
}

// Skip-gram with negative sampling, single-threaded for determinism.
inline EmbeddingTable train_embeddings(const std::vector<std::vector<std::string>>& token_streams,
                                       const EmbedConfig& config) {
    std::unordered_map<std::string, std::int64_t> freq;
    std::int64_t total_tokens = 0;
    for (const auto& stream : token_streams)
        for (const auto& tok : stream) {
            ++freq[tok];
            ++total_tokens;
        }
    if (total_tokens == 0) throw EmptyCorpus("embedding training corpus has no tokens");

    EmbeddingTable table;
    table.config = config;
    {
        // deterministic vocab order: frequency desc, then lexicographic
        std::vector<std::pair<std::string, std::int64_t>> items(freq.begin(), freq.end());
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (auto& [w, c] : items) {
            if (c < config.min_count) continue;
            table.vocab[w] = int(table.words.size());
            table.words.push_back(w);
            table.counts.push_back(c);
        }
    }
    if (table.words.empty()) throw EmptyCorpus("no word meets min_count");
    int vocab_size = int(table.words.size());

    Rng rng(config.seed);
    table.word_vectors.resize(vocab_size, config.dim);
    table.bucket_vectors.resize(int(config.buckets), config.dim);
    float scale = 1.0f / float(config.dim);
    for (int r = 0; r < vocab_size; ++r)
        for (int c = 0; c < config.dim; ++c) table.word_vectors(r, c) = float(rng.uniform(-scale, scale));
    for (std::uint32_t r = 0; r < config.buckets; ++r)
        for (int c = 0; c < config.dim; ++c) table.bucket_vectors(int(r), c) = float(rng.uniform(-scale, scale));

    // output (context) matrix, zero-initialized as in word2vec
    Eigen::MatrixXf output = Eigen::MatrixXf::Zero(vocab_size, config.dim);

    // unigram^0.75 negative-sampling distribution
    auto cumulative = std::vector<double>(std::size_t(vocab_size));
    double acc = 0.0;
    for (int w = 0; w < vocab_size; ++w) {
        acc += std::pow(double(table.counts[std::size_t(w)]), 0.75);
        cumulative[std::size_t(w)] = acc;
    }
    auto sample_negative = [&](int exclude) -> int {
        for (;;) {
            double u = rng.uniform() * acc;
            int w = int(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
            if (w >= vocab_size) w = vocab_size - 1;
            if (w != exclude || vocab_size == 1) return w;
        }
    };

    // subword bucket lists per vocab word, precomputed
    auto subwords = std::vector<std::vector<std::uint32_t>>(std::size_t(vocab_size));
    for (int w = 0; w < vocab_size; ++w) subwords[std::size_t(w)] = table.subword_buckets_of(table.words[std::size_t(w)]);

    const std::int64_t planned = std::int64_t(config.epochs) * total_tokens;
    std::int64_t processed = 0;
    Eigen::VectorXf hidden(config.dim), grad(config.dim);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& stream : token_streams) {
            std::vector<int> ids;
            ids.reserve(stream.size());
            for (const auto& tok : stream) {
                auto it = table.vocab.find(tok);
                if (it != table.vocab.end()) ids.push_back(it->second);
            }
            for (std::size_t t = 0; t < ids.size(); ++t) {
                ++processed;
                float lr = table.config.learning_rate *
                           std::max(1.0f - float(processed) / float(planned + 1), 1e-4f);
                int center = ids[t];
                int b = 1 + int(rng.below(std::uint64_t(config.window)));
                std::size_t lo = t >= std::size_t(b) ? t - std::size_t(b) : 0;
                std::size_t hi = std::min(ids.size(), t + std::size_t(b) + 1);

                hidden = table.word_vectors.row(center).transpose();
                for (auto bkt : subwords[std::size_t(center)]) hidden += table.bucket_vectors.row(int(bkt)).transpose();

                for (std::size_t c = lo; c < hi; ++c) {
                    if (c == t) continue;
                    int context = ids[c];
                    grad.setZero();
                    for (int s = 0; s <= config.negative_samples; ++s) {
                        int target = s == 0 ? context : sample_negative(context);
                        float label = s == 0 ? 1.0f : 0.0f;
                        float score = detail::sigmoidf(hidden.dot(output.row(target).transpose()));
                        float g = (label - score) * lr;
                        grad += g * output.row(target).transpose();
                        output.row(target) += g * hidden.transpose();
                    }
                    table.word_vectors.row(center) += grad.transpose();
                    for (auto bkt : subwords[std::size_t(center)]) table.bucket_vectors.row(int(bkt)) += grad.transpose();
                    hidden += grad * float(1 + subwords[std::size_t(center)].size());
                }
            }
        }
    }
    table.finalize();
    return table;
}

// Top-k in-vocabulary words by cosine similarity to `word`, excluding the
// query itself; ties broken lexicographically.
inline std::vector<std::pair<std::string, double>> most_similar(const EmbeddingTable& table,
                                                                const std::string& word, int k) {
    Eigen::VectorXf q = table.vector(word);
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(table.words.size());
    for (std::size_t w = 0; w < table.words.size(); ++w) {
        if (table.words[w] == word) continue;
        double cs = cosine(q, Eigen::VectorXf(table.composed().row(int(w)).transpose()));
        scored.emplace_back(table.words[w], cs);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (int(scored.size()) > k) scored.resize(std::size_t(k));
    return scored;
}

// ---- serialization ----
// Layout: magic, version, config, vocabulary, then the word and bucket
// matrices as row-major little-endian 32-bit floats.

inline constexpr char kEmbedMagic[4] = {'R', 'A', 'E', 'M'};
inline constexpr std::uint32_t kEmbedVersion = 1;

inline void save_embeddings(std::ostream& os, const EmbeddingTable& t) {
    os.write(kEmbedMagic, 4);
    io::write_u32(os, kEmbedVersion);
    io::write_u32(os, std::uint32_t(t.config.dim));
    io::write_u32(os, std::uint32_t(t.words.size()));
    io::write_u32(os, t.config.buckets);
    io::write_u32(os, std::uint32_t(t.config.min_count));
    io::write_u32(os, std::uint32_t(t.config.char_ngram_min));
    io::write_u32(os, std::uint32_t(t.config.char_ngram_max));
    io::write_u32(os, std::uint32_t(t.config.window));
    io::write_u32(os, std::uint32_t(t.config.negative_samples));
    io::write_u32(os, std::uint32_t(t.config.epochs));
    io::write_f32(os, t.config.learning_rate);
    io::write_u64(os, t.config.seed);
    for (std::size_t w = 0; w < t.words.size(); ++w) {
        io::write_string(os, t.words[w]);
        io::write_u64(os, std::uint64_t(t.counts[w]));
    }
    for (int r = 0; r < t.word_vectors.rows(); ++r)
        for (int c = 0; c < t.word_vectors.cols(); ++c) io::write_f32(os, t.word_vectors(r, c));
    for (int r = 0; r < t.bucket_vectors.rows(); ++r)
        for (int c = 0; c < t.bucket_vectors.cols(); ++c) io::write_f32(os, t.bucket_vectors(r, c));
}

inline EmbeddingTable load_embeddings(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kEmbedMagic, 4) != 0) throw DataError("not an embedding file");
    std::uint32_t version = io::read_u32(is);
    if (version != kEmbedVersion) throw DataError("unsupported embedding file version");
    EmbeddingTable t;
    t.config.dim = int(io::read_u32(is));
    std::uint32_t vocab_size = io::read_u32(is);
    t.config.buckets = io::read_u32(is);
    t.config.min_count = int(io::read_u32(is));
    t.config.char_ngram_min = int(io::read_u32(is));
    t.config.char_ngram_max = int(io::read_u32(is));
    t.config.window = int(io::read_u32(is));
    t.config.negative_samples = int(io::read_u32(is));
    t.config.epochs = int(io::read_u32(is));
    t.config.learning_rate = io::read_f32(is);
    t.config.seed = io::read_u64(is);
    t.words.reserve(vocab_size);
    for (std::uint32_t w = 0; w < vocab_size; ++w) {
        std::string s = io::read_string(is);
        t.vocab[s] = int(w);
        t.words.push_back(std::move(s));
        t.counts.push_back(std::int64_t(io::read_u64(is)));
    }
    t.word_vectors.resize(int(vocab_size), t.config.dim);
    for (int r = 0; r < t.word_vectors.rows(); ++r)
        for (int c = 0; c < t.word_vectors.cols(); ++c) t.word_vectors(r, c) = io::read_f32(is);
    t.bucket_vectors.resize(int(t.config.buckets), t.config.dim);
    for (int r = 0; r < t.bucket_vectors.rows(); ++r)
        for (int c = 0; c < t.bucket_vectors.cols(); ++c) t.bucket_vectors(r, c) = io::read_f32(is);
    t.finalize();
    return t;
}

inline void save_embeddings_file(const std::string& path, const EmbeddingTable& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write embedding file: " + path);
    save_embeddings(os, t);
}

inline EmbeddingTable load_embeddings_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open embedding file: " + path);
    return load_embeddings(is);
}

} // namespace radannot::embed
