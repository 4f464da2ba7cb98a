#pragma once

// Rule-based sentence-annotation matching. For each annotation the
// heading yields candidate words (n-grams, word stems, dictionary
// synonyms, embedding neighbors); the sentences containing most of them
// form S_m and four branches resolve the match:
//   (1) a single best sentence wins outright,
//   (2) heading-only annotations take the earliest best sentence,
//   (3) subheading candidate counts disambiguate several best sentences,
//   (4) no candidate hit anywhere: the sentence encoder picks the most
//       similar sentence if it clears the calibrated threshold.

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/encoder.hpp"
#include "radannot/match_types.hpp"
#include "radannot/porter.hpp"
#include "radannot/textproc.hpp"

namespace radannot::match {

// Symmetric term-synonym dictionary; multiword entries allowed.
class SynonymDict {
public:
    void add(const std::string& term, const std::string& synonym) {
        std::string a = str::lower(str::trim(term));
        std::string b = str::lower(str::trim(synonym));
        if (a.empty() || b.empty()) throw DataError("synonym entries must be non-empty");
        link(a, b);
        link(b, a);
        entries_.emplace_back(a, b);
    }

    const std::vector<std::string>* lookup(const std::string& term) const {
        auto it = map_.find(str::lower(str::trim(term)));
        return it == map_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    void link(const std::string& from, const std::string& to) {
        auto& v = map_[from];
        if (std::find(v.begin(), v.end(), to) == v.end()) v.push_back(to);
    }

    std::unordered_map<std::string, std::vector<std::string>> map_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

// File format: lines "term<TAB>synonym", '#' starts a comment line.
inline SynonymDict load_synonyms(std::istream& is) {
    SynonymDict d;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = str::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("synonym file line " + std::to_string(line_no) + ": expected term<TAB>synonym");
        try {
            d.add(line.substr(0, tab), line.substr(tab + 1));
        } catch (const DataError&) {
            throw DataError("synonym file line " + std::to_string(line_no) + ": empty term");
        }
    }
    return d;
}

inline SynonymDict load_synonyms_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open synonym file: " + path);
    return load_synonyms(is);
}

inline void save_synonyms(std::ostream& os, const SynonymDict& d) {
    for (const auto& [a, b] : d.entries()) os << a << '\t' << b << '\n';
}

enum class Source { ngram, stem, synonym, neighbor };

inline const char* source_name(Source s) {
    switch (s) {
        case Source::ngram: return "ngram";
        case Source::stem: return "stem";
        case Source::synonym: return "synonym";
        case Source::neighbor: return "neighbor";
    }
    return "?";
}

struct CandidateWordSet {
    // insertion-ordered, deduplicated on (word, source)
    std::vector<std::pair<std::string, Source>> words;

    void insert(const std::string& w, Source s) {
        if (w.empty()) return;
        for (const auto& [word, src] : words)
            if (word == w && src == s) return;
        words.emplace_back(w, s);
    }

    bool empty() const { return words.empty(); }
};

struct MatcherConfig {
    bool use_ngrams = true;
    bool use_stems = true;
    bool use_synonyms = true;
    bool use_neighbors = true;
    bool use_encoder_fallback = true;
    int k = 5; // embedding neighbors per heading word
};

// Memoizes k-most-similar queries; they dominate matching cost otherwise.
class NeighborCache {
public:
    NeighborCache(const embed::EmbeddingTable* table, int k) : table_(table), k_(k) {}

    const std::vector<std::string>& neighbors(const std::string& word) const {
        auto it = cache_.find(word);
        if (it != cache_.end()) return it->second;
        std::vector<std::string> ws;
        if (table_) {
            for (auto& [w, cos] : embed::most_similar(*table_, word, k_)) ws.push_back(w);
        }
        return cache_.emplace(word, std::move(ws)).first->second;
    }

private:
    const embed::EmbeddingTable* table_;
    int k_;
    mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
};

// Candidate words of a heading term: word n-grams of every order, Porter
// stems of its words, synonyms of the full term and of each word, and
// the k nearest embedding neighbors of each word. The term's own words
// are candidates under every config; the flags gate the expansions.
inline CandidateWordSet heading_candidates(const std::string& term, const SynonymDict* dict,
                                           const NeighborCache* neighbors, const MatcherConfig& config) {
    CandidateWordSet set;
    std::vector<std::string> words = text::tokenize(term);
    for (const auto& w : words) set.insert(w, Source::ngram);
    if (config.use_ngrams)
        for (std::size_t n = 2; n <= words.size(); ++n)
            for (auto& g : text::word_ngrams(words, n)) set.insert(g, Source::ngram);
    if (config.use_stems)
        for (const auto& w : words) set.insert(text::porter_stem(w), Source::stem);
    if (config.use_synonyms && dict) {
        // every n-gram of the term is a lookup key: multiword dictionary
        // entries ("chronic obstructive") must be found inside longer
        // headings
        for (std::size_t n = 1; n <= words.size(); ++n)
            for (auto& key : text::word_ngrams(words, n))
                if (const auto* syns = dict->lookup(key))
                    for (const auto& s : *syns) set.insert(s, Source::synonym);
    }
    if (config.use_neighbors && neighbors)
        for (const auto& w : words)
            for (const auto& nb : neighbors->neighbors(w)) set.insert(nb, Source::neighbor);
    return set;
}

// Subheading candidates use n-grams and synonyms only.
inline CandidateWordSet subheading_candidates(const std::vector<std::string>& terms, const SynonymDict* dict,
                                              const MatcherConfig& config) {
    MatcherConfig sub = config;
    sub.use_stems = false;
    sub.use_neighbors = false;
    CandidateWordSet set;
    for (const auto& term : terms) {
        CandidateWordSet one = heading_candidates(term, dict, nullptr, sub);
        for (auto& [w, s] : one.words) set.insert(w, s);
    }
    return set;
}

namespace detail {

inline bool contains_sequence(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool all = true;
        for (std::size_t j = 0; j < needle.size(); ++j)
            if (haystack[i + j] != needle[j]) {
                all = false;
                break;
            }
        if (all) return true;
    }
    return false;
}

// token views of one sentence: literal and stemmed
struct SentenceView {
    std::vector<std::string> tokens;
    std::vector<std::string> stems;

    explicit SentenceView(const std::vector<std::string>& toks) : tokens(toks) {
        stems.reserve(toks.size());
        for (const auto& t : toks) stems.push_back(text::porter_stem(t));
    }
};

// Number of distinct candidate words the sentence contains. Stem-sourced
// candidates are already stems and compare against stemmed sentence
// tokens; everything else compares literally. A word counts once however
// many sources produced it.
inline int count_contained(const SentenceView& sv, const CandidateWordSet& set) {
    std::map<std::string, std::pair<bool, bool>> by_word; // word -> (has stem source, has literal source)
    for (const auto& [w, s] : set.words) {
        auto& flags = by_word[w];
        (s == Source::stem ? flags.first : flags.second) = true;
    }
    int count = 0;
    for (const auto& [w, flags] : by_word) {
        std::vector<std::string> parts = str::split(w, ' ');
        bool hit = false;
        if (flags.second && contains_sequence(sv.tokens, parts)) hit = true;
        if (!hit && flags.first && contains_sequence(sv.stems, parts)) hit = true;
        if (hit) ++count;
    }
    return count;
}

} // namespace detail

enum class Branch { unique = 0, heading_only = 1, subheading = 2, encoder = 3 };

struct ReportMatch {
    std::vector<MatchedPair> pairs;      // one per annotation, unmatched as index -1
    std::vector<Branch> branches;        // branch fired per annotation
};

inline ReportMatch match_report(const corpus::Report& report, const SynonymDict* dict,
                                const NeighborCache* neighbors, const embed::SentenceEncoder* encoder,
                                const MatcherConfig& config) {
    ReportMatch out;
    if (report.annotations.empty()) return out;
    std::vector<corpus::Sentence> sents = corpus::split_sentences(report);
    if (sents.empty()) return out;

    std::vector<detail::SentenceView> views;
    views.reserve(sents.size());
    for (const auto& s : sents) views.emplace_back(s.tokens);

    // sentence embeddings are computed lazily, once per report
    std::vector<Eigen::VectorXf> sent_vecs;
    auto sentence_vector = [&](std::size_t i) -> const Eigen::VectorXf& {
        if (sent_vecs.empty()) {
            sent_vecs.reserve(sents.size());
            for (const auto& s : sents) sent_vecs.push_back(encoder->embed(s.tokens));
        }
        return sent_vecs[i];
    };

    for (int ai = 0; ai < int(report.annotations.size()); ++ai) {
        const corpus::Annotation& ann = report.annotations[std::size_t(ai)];
        CandidateWordSet h_words = heading_candidates(ann.heading, dict, neighbors, config);

        std::vector<int> counts(sents.size(), 0);
        int best = 0;
        for (std::size_t si = 0; si < sents.size(); ++si) {
            counts[si] = detail::count_contained(views[si], h_words);
            best = std::max(best, counts[si]);
        }
        std::vector<int> s_m;
        if (best > 0)
            for (std::size_t si = 0; si < sents.size(); ++si)
                if (counts[si] == best) s_m.push_back(int(si));

        MatchedPair pair;
        pair.report_id = report.id;
        pair.annotation_index = ai;
        pair.label = 1;
        pair.provenance = Provenance::rule;

        Branch branch;
        if (s_m.empty()) {
            branch = Branch::encoder;
            pair.sentence_index = -1;
            if (config.use_encoder_fallback && encoder && encoder->table) {
                Eigen::VectorXf ann_vec = encoder->embed(text::tokenize(ann.deslashed()));
                int best_si = -1;
                double best_cos = 0.0;
                for (std::size_t si = 0; si < sents.size(); ++si) {
                    double c = embed::cosine(sentence_vector(si), ann_vec);
                    if (best_si < 0 || c > best_cos) {
                        best_si = int(si);
                        best_cos = c;
                    }
                }
                if (best_si >= 0 && best_cos > encoder->threshold) {
                    pair.sentence_index = best_si;
                    pair.provenance = Provenance::encoder;
                }
            }
        } else if (s_m.size() == 1) {
            branch = Branch::unique;
            pair.sentence_index = s_m[0];
        } else if (ann.subheadings.empty()) {
            branch = Branch::heading_only;
            pair.sentence_index = s_m[0];
        } else {
            branch = Branch::subheading;
            CandidateWordSet sh_words = subheading_candidates(ann.subheadings, dict, config);
            int best_si = s_m[0];
            int best_count = -1;
            for (int si : s_m) {
                int c = detail::count_contained(views[std::size_t(si)], sh_words);
                if (c > best_count) {
                    best_count = c;
                    best_si = si;
                }
            }
            pair.sentence_index = best_si;
        }
        out.pairs.push_back(std::move(pair));
        out.branches.push_back(branch);
    }
    return out;
}

struct CorpusMatch {
    std::vector<MatchedPair> pairs;
    std::size_t branch_counts[4] = {0, 0, 0, 0}; // unique, heading-only, subheading, encoder
    std::size_t unmatched = 0;
};

inline CorpusMatch match_corpus(const std::vector<corpus::Report>& reports, const SynonymDict* dict,
                                const embed::EmbeddingTable* table, const embed::SentenceEncoder* encoder,
                                const MatcherConfig& config) {
    NeighborCache cache(config.use_neighbors ? table : nullptr, config.k);
    CorpusMatch out;
    for (const auto& r : reports) {
        if (!r.has_text()) continue;
        ReportMatch rm = match_report(r, dict, &cache, encoder, config);
        for (std::size_t i = 0; i < rm.pairs.size(); ++i) {
            ++out.branch_counts[int(rm.branches[i])];
            if (rm.pairs[i].unmatched()) ++out.unmatched;
            out.pairs.push_back(std::move(rm.pairs[i]));
        }
    }
    return out;
}

// Uniform random sentence per annotation.
inline void random_baseline_into(const corpus::Report& report, Rng& rng, std::vector<MatchedPair>& out) {
    if (!report.has_text() || report.annotations.empty()) return;
    std::vector<corpus::Sentence> sents = corpus::split_sentences(report);
    if (sents.empty()) return;
    for (int ai = 0; ai < int(report.annotations.size()); ++ai) {
        MatchedPair p;
        p.report_id = report.id;
        p.annotation_index = ai;
        p.sentence_index = int(rng.below(sents.size()));
        p.label = 1;
        p.provenance = Provenance::random_baseline;
        out.push_back(std::move(p));
    }
}

inline std::vector<MatchedPair> random_baseline(const corpus::Report& report, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<MatchedPair> out;
    random_baseline_into(report, rng, out);
    return out;
}

inline std::vector<MatchedPair> random_baseline(const std::vector<corpus::Report>& reports, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<MatchedPair> out;
    for (const auto& r : reports) random_baseline_into(r, rng, out);
    return out;
}

// Fraction of predictions agreeing with ground truth; unmatched
// predictions count as wrong. Every prediction must be covered.
inline double evaluate_matching(const std::vector<MatchedPair>& predicted,
                                const std::vector<MatchedPair>& ground_truth) {
    if (predicted.empty()) throw DataError("no predictions to evaluate");
    std::map<std::pair<std::string, int>, int> gt;
    for (const auto& g : ground_truth)
        if (g.label == 1) gt[{g.report_id, g.annotation_index}] = g.sentence_index;
    std::size_t correct = 0;
    for (const auto& p : predicted) {
        auto it = gt.find({p.report_id, p.annotation_index});
        if (it == gt.end())
            throw MissingGroundTruth("no ground truth for report " + p.report_id + " annotation " +
                                     std::to_string(p.annotation_index));
        if (!p.unmatched() && p.sentence_index == it->second) ++correct;
    }
    return double(correct) / double(predicted.size());
}

// Per-branch diagnostic: apply a single condition of the matching rule to
// every annotation. condition 1 takes uniquely best sentences only,
// 2 the earliest best sentence, 3 subheading disambiguation among the
// best, 4 the encoder alone over all sentences.
inline std::vector<MatchedPair> match_corpus_condition(const std::vector<corpus::Report>& reports,
                                                       const SynonymDict* dict, const embed::EmbeddingTable* table,
                                                       const embed::SentenceEncoder* encoder,
                                                       const MatcherConfig& config, int condition) {
    if (condition < 1 || condition > 4) throw BadConfig("condition must be 1..4");
    NeighborCache cache(config.use_neighbors ? table : nullptr, config.k);
    std::vector<MatchedPair> out;
    for (const auto& r : reports) {
        if (!r.has_text() || r.annotations.empty()) continue;
        std::vector<corpus::Sentence> sents = corpus::split_sentences(r);
        if (sents.empty()) continue;
        std::vector<detail::SentenceView> views;
        views.reserve(sents.size());
        for (const auto& s : sents) views.emplace_back(s.tokens);
        std::vector<Eigen::VectorXf> sent_vecs;
        if (condition == 4 && encoder && encoder->table)
            for (const auto& s : sents) sent_vecs.push_back(encoder->embed(s.tokens));

        for (int ai = 0; ai < int(r.annotations.size()); ++ai) {
            const corpus::Annotation& ann = r.annotations[std::size_t(ai)];
            MatchedPair p;
            p.report_id = r.id;
            p.annotation_index = ai;
            p.sentence_index = -1;
            p.label = 1;
            p.provenance = condition == 4 ? Provenance::encoder : Provenance::rule;

            if (condition == 4) {
                if (!sent_vecs.empty()) {
                    Eigen::VectorXf ann_vec = encoder->embed(text::tokenize(ann.deslashed()));
                    int best_si = -1;
                    double best_cos = 0.0;
                    for (std::size_t si = 0; si < sent_vecs.size(); ++si) {
                        double c = embed::cosine(sent_vecs[si], ann_vec);
                        if (best_si < 0 || c > best_cos) {
                            best_si = int(si);
                            best_cos = c;
                        }
                    }
                    if (best_si >= 0 && best_cos > encoder->threshold) p.sentence_index = best_si;
                }
            } else {
                CandidateWordSet h_words = heading_candidates(ann.heading, dict, &cache, config);
                std::vector<int> s_m;
                int best = 0;
                std::vector<int> counts(sents.size(), 0);
                for (std::size_t si = 0; si < sents.size(); ++si) {
                    counts[si] = detail::count_contained(views[si], h_words);
                    best = std::max(best, counts[si]);
                }
                if (best > 0)
                    for (std::size_t si = 0; si < sents.size(); ++si)
                        if (counts[si] == best) s_m.push_back(int(si));
                if (!s_m.empty()) {
                    if (condition == 1) {
                        if (s_m.size() == 1) p.sentence_index = s_m[0];
                    } else if (condition == 2) {
                        p.sentence_index = s_m[0];
                    } else {
                        CandidateWordSet sh_words = subheading_candidates(ann.subheadings, dict, config);
                        int best_si = s_m[0];
                        int best_count = -1;
                        for (int si : s_m) {
                            int c = detail::count_contained(views[std::size_t(si)], sh_words);
                            if (c > best_count) {
                                best_count = c;
                                best_si = si;
                            }
                        }
                        p.sentence_index = best_si;
                    }
                }
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

// ---- match file I/O ----
// Lines "report_id<TAB>annotation_index<TAB>sentence_index" with an
// optional provenance column; unmatched entries carry index -1.

inline void save_matches(std::ostream& os, const std::vector<MatchedPair>& pairs, bool with_provenance = true) {
    for (const auto& p : pairs) {
        os << p.report_id << '\t' << p.annotation_index << '\t' << p.sentence_index;
        if (with_provenance) os << '\t' << provenance_name(p.provenance);
        os << '\n';
    }
}

inline std::vector<MatchedPair> load_matches(std::istream& is) {
    std::vector<MatchedPair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = str::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> cols = str::split(t, '\t');
        if (cols.size() != 3 && cols.size() != 4)
            throw DataError("match file line " + std::to_string(line_no) + ": expected 3 or 4 columns");
        MatchedPair p;
        p.report_id = str::trim(cols[0]);
        try {
            p.annotation_index = std::stoi(cols[1]);
            p.sentence_index = std::stoi(cols[2]);
        } catch (const std::exception&) {
            throw DataError("match file line " + std::to_string(line_no) + ": bad index");
        }
        p.label = 1;
        p.provenance = Provenance::manual;
        if (cols.size() == 4) p.provenance = parse_provenance(str::trim(cols[3]), line_no);
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<MatchedPair> load_matches_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open match file: " + path);
    return load_matches(is);
}

// ---- ablation ----

struct AblationRow {
    std::string name;
    double accuracy = 0.0;
    std::size_t branch_counts[4] = {0, 0, 0, 0};
    std::size_t unmatched = 0;
};

// Candidate-source ablation in the order random baseline, n-grams only,
// +synonyms, +stems, +neighbors (full rule), full rule + encoder.
inline std::vector<AblationRow> run_ablation(const std::vector<corpus::Report>& reports,
                                             const std::vector<MatchedPair>& ground_truth, const SynonymDict* dict,
                                             const embed::EmbeddingTable* table,
                                             const embed::SentenceEncoder* encoder, std::uint64_t seed) {
    std::vector<AblationRow> rows;
    auto push = [&](const std::string& name, const std::vector<MatchedPair>& pairs,
                    const std::size_t* branches, std::size_t unmatched) {
        AblationRow row;
        row.name = name;
        row.accuracy = evaluate_matching(pairs, ground_truth);
        if (branches)
            for (int b = 0; b < 4; ++b) row.branch_counts[b] = branches[b];
        row.unmatched = unmatched;
        rows.push_back(std::move(row));
    };

    push("random", random_baseline(reports, seed), nullptr, 0);

    auto run_config = [&](const std::string& name, MatcherConfig cfg, const embed::SentenceEncoder* enc) {
        CorpusMatch m = match_corpus(reports, dict, table, enc, cfg);
        push(name, m.pairs, m.branch_counts, m.unmatched);
    };

    MatcherConfig ngram_only;
    ngram_only.use_stems = ngram_only.use_synonyms = ngram_only.use_neighbors = false;
    ngram_only.use_encoder_fallback = false;
    run_config("ngram", ngram_only, nullptr);

    MatcherConfig with_syn = ngram_only;
    with_syn.use_synonyms = true;
    run_config("ngram+synonyms", with_syn, nullptr);

    MatcherConfig with_stem = with_syn;
    with_stem.use_stems = true;
    run_config("ngram+synonyms+stems", with_stem, nullptr);

    MatcherConfig full_rule = with_stem;
    full_rule.use_neighbors = true;
    run_config("rule", full_rule, nullptr);

    MatcherConfig with_encoder = full_rule;
    with_encoder.use_encoder_fallback = true;
    run_config("rule+encoder", with_encoder, encoder);

    return rows;
}

inline std::string render_ablation(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "method                  accuracy   b1     b2     b3     b4     unmatched\n";
    for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-22s  %8.4f  %5zu  %5zu  %5zu  %5zu  %9zu\n", r.name.c_str(), r.accuracy,
                      r.branch_counts[0], r.branch_counts[1], r.branch_counts[2], r.branch_counts[3], r.unmatched);
        os << buf;
    }
    for (const auto& r : rows) {
        std::string key = r.name;
        for (auto& c : key)
            if (c == '+') c = '_';
        os << "accuracy_" << key << "=" << r.accuracy << '\n';
    }
    return os.str();
}

} // namespace radannot::match
