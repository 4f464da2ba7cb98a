#pragma once

// Token vocabulary for the sentence-to-annotation model. Six reserved ids
// come first; source-side out-of-vocabulary words get per-sequence extended
// ids past the base vocabulary so the copy mechanism can emit them.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/textproc.hpp"

namespace radannot::seq2seq {

inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2; // surface "."
inline constexpr int kUnk = 3;
inline constexpr int kSlash = 4;  // term separator inside one annotation
inline constexpr int kAnnSep = 5; // between consecutive annotations
inline constexpr int kNumSpecials = 6;

struct Vocab {
    std::vector<std::string> tokens; // id → surface, specials first
    std::unordered_map<std::string, int> ids;

    int size() const { return int(tokens.size()); }

    bool contains(const std::string& t) const { return ids.count(t) != 0; }

    int id_of(const std::string& t) const {
        auto it = ids.find(t);
        return it == ids.end() ? kUnk : it->second;
    }

    const std::string& token_of(int id) const {
        if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " out of range");
        return tokens[std::size_t(id)];
    }
};

inline const std::vector<std::string>& special_surfaces() {
    static const std::vector<std::string> s = {"<pad>", "<s>", ".", "<unk>", "/", "<sep>"};
    return s;
}

// Frequency-then-lexicographic order keeps ids stable across runs.
inline Vocab build_vocab(const std::vector<std::vector<std::string>>& sequences, int min_freq = 1) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& seq : sequences)
        for (const auto& tok : seq) ++counts[tok];

    Vocab v;
    v.tokens = special_surfaces();
    for (int i = 0; i < kNumSpecials; ++i) v.ids[v.tokens[std::size_t(i)]] = i;

    std::vector<std::pair<std::string, std::uint64_t>> order(counts.begin(), counts.end());
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [tok, n] : order) {
        if (n < std::uint64_t(min_freq)) continue;
        if (v.ids.count(tok)) continue; // token spelled like a reserved surface
        v.ids[tok] = v.size();
        v.tokens.push_back(tok);
    }
    return v;
}

// Source tokens mapped to extended ids: in-vocabulary words keep their id,
// unknown words get base_size + slot in first-occurrence order.
struct SourceEncoding {
    std::vector<int> ids;
    std::vector<std::string> oov_words;
    int base_size = 0;

    int extended_size() const { return base_size + int(oov_words.size()); }

    // surface form of any extended id
    std::string token_of(const Vocab& v, int id) const {
        if (id < base_size) return v.token_of(id);
        std::size_t slot = std::size_t(id - base_size);
        if (slot >= oov_words.size()) throw DataError("extended id " + std::to_string(id) + " out of range");
        return oov_words[slot];
    }
};

inline SourceEncoding encode_source(const Vocab& v, const std::vector<std::string>& tokens) {
    SourceEncoding enc;
    enc.base_size = v.size();
    for (const auto& tok : tokens) {
        auto it = v.ids.find(tok);
        if (it != v.ids.end()) {
            enc.ids.push_back(it->second);
            continue;
        }
        int slot = -1;
        for (std::size_t i = 0; i < enc.oov_words.size(); ++i)
            if (enc.oov_words[i] == tok) {
                slot = int(i);
                break;
            }
        if (slot < 0) {
            slot = int(enc.oov_words.size());
            enc.oov_words.push_back(tok);
        }
        enc.ids.push_back(enc.base_size + slot);
    }
    return enc;
}

// Target surfaces for one sentence: each annotation as term words with "/"
// between terms, "<sep>" between annotations, "." terminal. No annotations
// at all leaves just the terminal.
inline std::vector<std::string> target_surfaces(const std::vector<corpus::Annotation>& annotations) {
    std::vector<std::string> out;
    for (std::size_t a = 0; a < annotations.size(); ++a) {
        if (a) out.push_back(special_surfaces()[kAnnSep]);
        const auto& ann = annotations[a];
        std::vector<std::string> terms;
        terms.push_back(ann.heading);
        for (const auto& s : ann.subheadings) terms.push_back(s);
        for (std::size_t t = 0; t < terms.size(); ++t) {
            if (t) out.push_back(special_surfaces()[kSlash]);
            for (const auto& w : text::tokenize(terms[t])) out.push_back(w);
        }
    }
    out.push_back(special_surfaces()[kEos]);
    return out;
}

// Target ids against a specific source: an out-of-vocabulary gold word that
// appears in the source takes its copy slot, otherwise UNK.
inline std::vector<int> build_targets(const Vocab& v, const SourceEncoding& src,
                                      const std::vector<corpus::Annotation>& annotations) {
    std::vector<int> out;
    for (const auto& tok : target_surfaces(annotations)) {
        auto it = v.ids.find(tok);
        if (it != v.ids.end()) {
            out.push_back(it->second);
            continue;
        }
        int id = kUnk;
        for (std::size_t i = 0; i < src.oov_words.size(); ++i)
            if (src.oov_words[i] == tok) {
                id = src.base_size + int(i);
                break;
            }
        out.push_back(id);
    }
    return out;
}

inline void save_vocab(std::ostream& os, const Vocab& v) {
    io::write_u32(os, std::uint32_t(v.tokens.size()));
    for (const auto& t : v.tokens) io::write_string(os, t);
}

inline Vocab load_vocab(std::istream& is) {
    std::uint32_t n = io::read_u32(is);
    if (n < std::uint32_t(kNumSpecials)) throw DataError("vocabulary smaller than the reserved token block");
    Vocab v;
    v.tokens.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        v.tokens.push_back(io::read_string(is));
        v.ids[v.tokens.back()] = int(i);
    }
    for (int i = 0; i < kNumSpecials; ++i)
        if (v.tokens[std::size_t(i)] != special_surfaces()[std::size_t(i)])
            throw DataError("vocabulary reserved block does not match this build");
    return v;
}

} // namespace radannot::seq2seq
