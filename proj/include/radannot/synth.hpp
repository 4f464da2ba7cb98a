#pragma once

// Synthetic report generator with exact ground truth. Sentences are
// templated as severity + qualifier + finding + location and the
// annotation is built from the same draw, so every annotation belongs to
// exactly one generating sentence. A controllable share of sentences
// replaces the finding with a dictionary synonym (reachable only through
// the synonym source), a stem-breaking variant (reachable only through
// embedding neighbors), or a one-off opaque token (reachable only through
// the sentence encoder), which makes matcher ablation rows move in a
// known direction.
//
// The per-term qualifier is the load-bearing part: it rides along with
// every non-opaque surface of its term and nothing else, so trained
// embeddings pull a term, its variant, its synonyms and the qualifier
// into one cluster instead of making all finding words mutual nearest
// neighbors. Without it, k-nearest expansion floods candidate sets with
// sibling findings and the full rule row falls below the synonym row at
// corpus scale.

#include <string>
#include <vector>

#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/matcher.hpp"
#include "radannot/match_types.hpp"
#include "radannot/textproc.hpp"

namespace radannot::synth {

struct SynthTerm {
    std::string term;                  // finding heading
    std::vector<std::string> synonyms; // sentence-side phrases, lexically disjoint from the term
    std::string qualifier;             // collocate unique to this term; empty disables it
};

inline std::vector<SynthTerm> default_synth_vocab() {
    return {
        {"cardiomegaly", {"enlarged heart"}, "borderline"},
        {"effusion", {"fluid collection"}, "layering"},
        {"pneumothorax", {"air pocket"}, "tension"},
        {"atelectasis", {"volume loss"}, "bibasilar"},
        {"granuloma", {"calcified nodule"}, "punctate"},
        {"opacity", {"hazy shadowing"}, "focal"},
        {"scarring", {"cicatrix"}, "linear"},
        {"consolidation", {"airspace filling"}, "patchy"},
        {"edema", {"vascular congestion"}, "interstitial"},
        {"emphysema", {"hyperexpansion"}, "bullous"},
        {"infiltrate", {"streaky marking"}, "perihilar"},
        {"fracture", {"cortical break"}, "displaced"},
    };
}

struct SynthConfig {
    std::uint64_t seed = 1;
    int n_reports = 100;
    int min_sentences = 3;
    int max_sentences = 8;
    std::vector<SynthTerm> vocab = default_synth_vocab();
    double negative_fraction = 0.25;  // sentences without any annotation
    double synonym_fraction = 0.15;   // annotations resolvable only via the dictionary
    double embedding_fraction = 0.05; // annotations resolvable only via embeddings;
                                      // half neighbor variants, half encoder-only opaques
};

struct SynthCorpus {
    std::vector<corpus::Report> reports;
    std::vector<match::MatchedPair> ground_truth;
    match::SynonymDict dict;
    corpus::CorpusStats stats;
};

namespace detail {

// surface form sharing character n-grams with the word but carrying a
// different Porter stem, so neither literal nor stem containment reaches it
inline std::string variant_word(const std::string& w) {
    if (w.empty()) return w;
    char last = w.back();
    if (last == 'y') return w.substr(0, w.size() - 1) + "ia";
    if (last == 'a' || last == 'e' || last == 'i' || last == 'o' || last == 'u') return w + "ta";
    // "oid" survives every Porter pass; a plain "es" can stem back to the word
    return w + "oid";
}

inline std::string variant_term(const std::string& term) {
    std::vector<std::string> words = str::split(term, ' ');
    for (auto& w : words) w = variant_word(w);
    return str::join(words, " ");
}

// One-off surface for encoder-only sentences. The letter tag keeps the
// token unique corpus-wide (the tokenizer would strip trailing digits),
// so it can never become anyone's embedding neighbor and the sentence
// stays invisible to every lexical candidate source.
inline std::string opaque_term(const std::string& term, std::size_t n) {
    std::string tag;
    do {
        tag += char('a' + int(n % 26));
        n /= 26;
    } while (n);
    std::vector<std::string> words = str::split(term, ' ');
    words[0] = variant_word(words[0]) + tag;
    for (std::size_t i = 1; i < words.size(); ++i) words[i] = variant_word(words[i]);
    return str::join(words, " ");
}

inline std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = char(s[0] - 'a' + 'A');
    return s;
}

inline const std::vector<std::string>& severities() {
    static const std::vector<std::string> v = {"mild", "moderate", "severe", "small", "large", "trace"};
    return v;
}

inline const std::vector<std::string>& locations() {
    static const std::vector<std::string> v = {
        "left lung base",  "right lung base",  "left upper lobe", "right upper lobe", "left lower lobe",
        "right lower lobe", "right middle lobe", "left apex",      "right apex",       "cardiac silhouette",
    };
    return v;
}

inline const std::vector<std::string>& negative_phrases() {
    static const std::vector<std::string> v = {
        "The examination is unremarkable.",
        "No acute abnormality identified.",
        "Visualized soft tissues are normal.",
        "Bony structures appear intact.",
        "Mediastinal contours are within normal limits.",
        "No interval change from prior study.",
        "The trachea is midline.",
        "Degenerative changes are incidentally noted.",
    };
    return v;
}

inline std::string simple_sentence(int tmpl, const std::string& sev, const std::string& surface,
                                   const std::string& loc) {
    switch (tmpl) {
        case 0: return "There is " + sev + " " + surface + " in the " + loc + ".";
        case 1: return capitalized(sev) + " " + surface + " at the " + loc + ".";
        default: return "The " + loc + " shows " + sev + " " + surface + ".";
    }
}

} // namespace detail

inline SynthCorpus generate(const SynthConfig& config) {
    if (config.n_reports < 1) throw BadConfig("n_reports must be positive");
    if (config.min_sentences < 1 || config.min_sentences > config.max_sentences)
        throw BadConfig("sentence range must satisfy 1 <= min <= max");
    if (config.vocab.empty()) throw BadConfig("synth vocab must be non-empty");
    auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
    if (!in_unit(config.negative_fraction) || !in_unit(config.synonym_fraction) ||
        !in_unit(config.embedding_fraction))
        throw BadConfig("fractions must lie in [0, 1]");
    if (config.synonym_fraction + config.embedding_fraction > 1.0)
        throw BadConfig("synonym and embedding fractions must sum to at most 1");
    for (const auto& t : config.vocab)
        if (str::trim(t.term).empty()) throw BadConfig("synth vocab terms must be non-empty");

    SynthCorpus out;
    for (const auto& t : config.vocab)
        for (const auto& syn : t.synonyms) out.dict.add(t.term, syn);

    Rng rng(config.seed);
    std::size_t total_sentence_words = 0;
    std::size_t total_annotation_words = 0;
    std::size_t opaques_emitted = 0;
    auto qualified = [](const SynthTerm& t, const std::string& surface) {
        return t.qualifier.empty() ? surface : t.qualifier + " " + surface;
    };

    for (int ri = 0; ri < config.n_reports; ++ri) {
        corpus::Report r;
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "synth-%06d", ri + 1);
            r.id = buf;
        }
        int n_sent = int(config.min_sentences + int(rng.below(std::uint64_t(config.max_sentences - config.min_sentences + 1))));

        // per-report pools: finding terms and locations are sampled
        // without replacement so each annotation stays unambiguous
        std::vector<std::size_t> term_pool(config.vocab.size());
        for (std::size_t i = 0; i < term_pool.size(); ++i) term_pool[i] = i;
        rng.shuffle(term_pool);
        std::size_t terms_taken = 0;

        std::vector<std::size_t> loc_pool(detail::locations().size());
        for (std::size_t i = 0; i < loc_pool.size(); ++i) loc_pool[i] = i;
        rng.shuffle(loc_pool);
        std::size_t locs_taken = 0;

        std::vector<std::size_t> neg_pool(detail::negative_phrases().size());
        for (std::size_t i = 0; i < neg_pool.size(); ++i) neg_pool[i] = i;
        rng.shuffle(neg_pool);
        std::size_t negs_taken = 0;

        std::vector<std::string> sentences;
        for (int si = 0; si < n_sent; ++si) {
            bool negative = rng.uniform() < config.negative_fraction;
            if (terms_taken >= term_pool.size() || locs_taken >= loc_pool.size()) negative = true;
            if (negative) {
                std::size_t pick = negs_taken < neg_pool.size()
                                       ? neg_pool[negs_taken++]
                                       : std::size_t(rng.below(detail::negative_phrases().size()));
                const std::string& text = detail::negative_phrases()[pick];
                sentences.push_back(text);
                total_sentence_words += text::tokenize(text).size();
                ++out.stats.sentences_without_annotations;
                continue;
            }

            bool composite = rng.uniform() < 0.15 && terms_taken + 2 <= term_pool.size();
            const std::string& loc = detail::locations()[loc_pool[locs_taken++]];
            std::string sentence_text;
            std::vector<std::string> raws;

            if (composite) {
                const SynthTerm& t1 = config.vocab[term_pool[terms_taken++]];
                const SynthTerm& t2 = config.vocab[term_pool[terms_taken++]];
                const std::string& sev1 = detail::severities()[rng.below(detail::severities().size())];
                const std::string& sev2 = detail::severities()[rng.below(detail::severities().size())];
                sentence_text = "There is " + sev1 + " " + qualified(t1, t1.term) + " and " + sev2 + " " +
                                qualified(t2, t2.term) + " in the " + loc + ".";
                raws.push_back(t1.term + "/" + loc + "/" + sev1);
                raws.push_back(t2.term + "/" + loc + "/" + sev2);
            } else {
                const SynthTerm& t = config.vocab[term_pool[terms_taken++]];
                const std::string& sev = detail::severities()[rng.below(detail::severities().size())];
                double u = rng.uniform();
                std::string surface = qualified(t, t.term);
                if (u < config.synonym_fraction && !t.synonyms.empty())
                    surface = qualified(t, t.synonyms[rng.below(t.synonyms.size())]);
                else if (u < config.synonym_fraction + 0.5 * config.embedding_fraction)
                    surface = qualified(t, detail::variant_term(t.term));
                else if (u < config.synonym_fraction + config.embedding_fraction)
                    surface = detail::opaque_term(t.term, opaques_emitted++);
                int tmpl = int(rng.below(3));
                sentence_text = detail::simple_sentence(tmpl, sev, surface, loc);
                raws.push_back(t.term + "/" + loc + "/" + sev);
            }

            sentences.push_back(sentence_text);
            total_sentence_words += text::tokenize(sentence_text).size();
            if (raws.size() == 1)
                ++out.stats.sentences_with_one_annotation;
            else
                ++out.stats.sentences_with_several_annotations;
            ++out.stats.sentences_with_annotations;

            for (const auto& raw : raws) {
                match::MatchedPair gt;
                gt.report_id = r.id;
                gt.annotation_index = int(r.annotations.size());
                gt.sentence_index = si;
                gt.label = 1;
                gt.provenance = match::Provenance::manual;
                out.ground_truth.push_back(std::move(gt));

                corpus::Annotation a = corpus::parse_annotation(raw);
                total_annotation_words += text::tokenize(a.deslashed()).size();
                r.annotations.push_back(std::move(a));
            }
        }

        out.stats.sentences += sentences.size();
        out.stats.annotations += r.annotations.size();
        r.findings_text = str::join(sentences, " ");
        out.reports.push_back(std::move(r));
    }

    out.stats.reports = out.reports.size();
    out.stats.avg_words_per_sentence =
        out.stats.sentences ? double(total_sentence_words) / double(out.stats.sentences) : 0.0;
    out.stats.avg_words_per_annotation =
        out.stats.annotations ? double(total_annotation_words) / double(out.stats.annotations) : 0.0;
    return out;
}

// Token streams for embedding training: one stream per generated sentence.
inline std::vector<std::vector<std::string>> token_streams(const SynthCorpus& corpus) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : corpus.reports)
        for (const auto& s : corpus::split_sentences(r)) out.push_back(s.tokens);
    return out;
}

} // namespace radannot::synth
