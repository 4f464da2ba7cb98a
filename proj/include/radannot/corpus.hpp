#pragma once

// Report corpus handling: annotation strings, report records, text
// preprocessing, sentence extraction, filtering, splits and the corpus
// statistics summary.
//
// Corpus file format: UTF-8, one JSON record per line with keys
//   id, comparison, indication, findings, impression, annotations
// where annotations is a list of "/"-separated term strings and missing
// keys mean empty.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radannot/common.hpp"
#include "radannot/match_types.hpp"
#include "radannot/textproc.hpp"

namespace radannot::corpus {

// A heading term plus ordered subheading terms. `raw` keeps the original
// string for display; heading/subheadings are lowercased and trimmed.
struct Annotation {
    std::string heading;
    std::vector<std::string> subheadings;
    std::string raw;

    std::size_t term_count() const { return 1 + subheadings.size(); }

    // terms joined by spaces instead of slashes (sentence form)
    std::string deslashed() const {
        std::string s = heading;
        for (const auto& t : subheadings) {
            s += ' ';
            s += t;
        }
        return s;
    }
};

inline constexpr std::size_t kMaxAnnotationTerms = 8;

inline Annotation parse_annotation(const std::string& raw) {
    std::string trimmed = str::trim(raw);
    if (trimmed.empty()) throw EmptyAnnotation("annotation is empty");
    std::vector<std::string> fields = str::split(trimmed, '/');
    if (fields.size() > kMaxAnnotationTerms)
        throw MalformedAnnotation("annotation \"" + trimmed + "\" has " + std::to_string(fields.size()) +
                                  " terms (max " + std::to_string(kMaxAnnotationTerms) + ")");
    Annotation a;
    a.raw = trimmed;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string term = str::lower(str::trim(fields[i]));
        if (term.empty())
            throw MalformedAnnotation("annotation \"" + trimmed + "\" has an empty term");
        if (i == 0)
            a.heading = term;
        else
            a.subheadings.push_back(term);
    }
    return a;
}

struct Report {
    std::string id;
    std::string comparison;
    std::string indication;
    std::string findings_text;
    std::string impression_text;
    std::vector<Annotation> annotations;
    bool is_normal = false;

    bool has_text() const { return !str::trim(findings_text).empty() || !str::trim(impression_text).empty(); }
};

struct Sentence {
    std::string report_id;
    int index = 0; // 0-based position within the report's findings paragraph
    std::string text;
    std::vector<std::string> tokens;
};

namespace detail {

inline bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) ||
           (static_cast<unsigned char>(c) >= 0x80); // keep non-ASCII bytes as-is
}

} // namespace detail

// Removes "XXXX" de-identification tokens, digits and punctuation other
// than sentence terminals, then collapses whitespace. Idempotent.
inline std::string preprocess_text(const std::string& raw) {
    std::string pass1;
    pass1.reserve(raw.size());
    for (char c : raw) {
        if (detail::is_digit(c)) continue;
        if (detail::is_word_char(c) || detail::is_terminal(c) || c == ' ' || c == '\t' || c == '\r' || c == '\n')
            pass1 += c;
        else
            pass1 += ' ';
    }
    std::vector<std::string> kept;
    std::istringstream iss(pass1);
    std::string tok;
    while (iss >> tok) {
        std::size_t end = tok.size();
        while (end > 0 && detail::is_terminal(tok[end - 1])) --end;
        if (tok.compare(0, end, "XXXX") == 0 && end == 4) {
            // de-identification token: keep only its trailing terminals
            if (end < tok.size()) kept.push_back(tok.substr(end));
            continue;
        }
        kept.push_back(tok);
    }
    return str::join(kept, " ");
}

// Splits the findings-then-impression text into preprocessed, tokenized
// sentences. Sentence boundaries are ".", "?" or "!" followed by
// whitespace or end of text, so decimals do not split.
inline std::vector<Sentence> split_sentences(const std::string& findings_text, const std::string& impression_text,
                                             const std::string& report_id = "") {
    std::string f = str::trim(findings_text);
    std::string i = str::trim(impression_text);
    if (f.empty() && i.empty()) throw NoUsableText("report " + report_id + " has no findings or impression text");
    std::string joined = f;
    if (!f.empty() && !i.empty()) joined += ' ';
    joined += i;

    std::vector<Sentence> out;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        std::string piece = preprocess_text(joined.substr(start, end - start));
        if (!piece.empty()) {
            Sentence s;
            s.report_id = report_id;
            s.index = int(out.size());
            s.text = piece;
            s.tokens = text::tokenize(piece);
            if (!s.tokens.empty()) out.push_back(std::move(s));
        }
    };
    for (std::size_t p = 0; p < joined.size(); ++p) {
        if (detail::is_terminal(joined[p])) {
            std::size_t q = p;
            while (q + 1 < joined.size() && detail::is_terminal(joined[q + 1])) ++q;
            bool boundary = q + 1 >= joined.size() || joined[q + 1] == ' ' || joined[q + 1] == '\t' ||
                            joined[q + 1] == '\r' || joined[q + 1] == '\n';
            if (boundary) {
                flush(p);
                start = q + 1;
            }
            p = q;
        }
    }
    if (start < joined.size()) flush(joined.size());
    return out;
}

inline std::vector<Sentence> split_sentences(const Report& r) {
    return split_sentences(r.findings_text, r.impression_text, r.id);
}

// Removes healthy-case reports (annotated with the "normal" marker),
// preserving the order of the rest.
inline std::vector<Report> filter_normals(const std::vector<Report>& reports) {
    std::vector<Report> out;
    out.reserve(reports.size());
    for (const auto& r : reports)
        if (!r.is_normal) out.push_back(r);
    return out;
}

struct CorpusStats {
    std::size_t reports = 0;
    std::size_t sentences = 0;
    std::size_t annotations = 0;
    std::size_t sentences_without_annotations = 0;
    std::size_t sentences_with_annotations = 0;
    std::size_t sentences_with_one_annotation = 0;
    std::size_t sentences_with_several_annotations = 0;
    double avg_words_per_sentence = 0.0;
    double avg_words_per_annotation = 0.0;

    bool operator==(const CorpusStats&) const = default;
};

// Exact counts and averages over a matched corpus. Sentence/annotation
// word counts use the module tokenizer; a sentence "has" an annotation
// when some matched pair with label 1 points at it.
inline CorpusStats compute_stats(const std::vector<Report>& reports,
                                 const std::vector<match::MatchedPair>& matches) {
    CorpusStats st;
    st.reports = reports.size();
    std::size_t total_sentence_words = 0;
    std::size_t total_annotation_words = 0;
    std::map<std::string, std::size_t> sentence_counts; // report id -> #sentences
    for (const auto& r : reports) {
        std::vector<Sentence> sents = split_sentences(r);
        sentence_counts[r.id] = sents.size();
        st.sentences += sents.size();
        for (const auto& s : sents) total_sentence_words += s.tokens.size();
        st.annotations += r.annotations.size();
        for (const auto& a : r.annotations) total_annotation_words += text::tokenize(a.deslashed()).size();
    }
    std::map<std::pair<std::string, int>, std::size_t> per_sentence;
    for (const auto& m : matches) {
        if (m.label != 1 || m.unmatched()) continue;
        if (!sentence_counts.count(m.report_id)) continue;
        ++per_sentence[{m.report_id, m.sentence_index}];
    }
    for (const auto& [key, n] : per_sentence) {
        (void)key;
        if (n == 1)
            ++st.sentences_with_one_annotation;
        else
            ++st.sentences_with_several_annotations;
    }
    st.sentences_with_annotations = per_sentence.size();
    st.sentences_without_annotations = st.sentences - st.sentences_with_annotations;
    st.avg_words_per_sentence = st.sentences ? double(total_sentence_words) / double(st.sentences) : 0.0;
    st.avg_words_per_annotation = st.annotations ? double(total_annotation_words) / double(st.annotations) : 0.0;
    return st;
}

struct CorpusSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
    double ratios[3] = {0.8, 0.1, 0.1};
};

// Deterministic shuffle-then-partition; floor counts for val and test,
// the remainder goes to train.
inline CorpusSplit make_splits(const std::vector<Report>& reports, double train_ratio, double val_ratio,
                               double test_ratio, std::uint64_t seed) {
    double sum = train_ratio + val_ratio + test_ratio;
    if (std::abs(sum - 1.0) > 1e-9 || train_ratio < 0 || val_ratio < 0 || test_ratio < 0)
        throw BadRatios("split ratios must be non-negative and sum to 1");
    std::vector<std::string> ids;
    ids.reserve(reports.size());
    for (const auto& r : reports) ids.push_back(r.id);
    Rng rng(seed);
    rng.shuffle(ids);
    std::size_t n = ids.size();
    std::size_t n_val = std::size_t(std::floor(val_ratio * double(n)));
    std::size_t n_test = std::size_t(std::floor(test_ratio * double(n)));
    std::size_t n_train = n - n_val - n_test;
    CorpusSplit sp;
    sp.seed = seed;
    sp.ratios[0] = train_ratio;
    sp.ratios[1] = val_ratio;
    sp.ratios[2] = test_ratio;
    sp.train_ids.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_train));
    sp.val_ids.assign(ids.begin() + std::ptrdiff_t(n_train), ids.begin() + std::ptrdiff_t(n_train + n_val));
    sp.test_ids.assign(ids.begin() + std::ptrdiff_t(n_train + n_val), ids.end());
    return sp;
}

// ---- file formats ----

inline Report report_from_json_line(const std::string& line, std::size_t line_no = 0) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    auto get_str = [&](const char* key) -> std::string {
        if (!j.contains(key) || j[key].is_null()) return "";
        if (!j[key].is_string())
            throw DataError("corpus line " + std::to_string(line_no) + ": key \"" + key + "\" is not a string");
        return j[key].get<std::string>();
    };
    Report r;
    r.id = get_str("id");
    if (r.id.empty()) throw DataError("corpus line " + std::to_string(line_no) + ": missing report id");
    r.comparison = get_str("comparison");
    r.indication = get_str("indication");
    r.findings_text = get_str("findings");
    r.impression_text = get_str("impression");
    if (j.contains("annotations")) {
        if (!j["annotations"].is_array())
            throw DataError("corpus line " + std::to_string(line_no) + ": annotations is not a list");
        for (const auto& item : j["annotations"]) {
            if (!item.is_string())
                throw DataError("corpus line " + std::to_string(line_no) + ": annotation entry is not a string");
            std::string raw = item.get<std::string>();
            if (str::lower(str::trim(raw)) == "normal") {
                r.is_normal = true;
                continue;
            }
            try {
                r.annotations.push_back(parse_annotation(raw));
            } catch (const DataError& e) {
                throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    return r;
}

inline std::string report_to_json_line(const Report& r) {
    nlohmann::json j;
    j["id"] = r.id;
    if (!r.comparison.empty()) j["comparison"] = r.comparison;
    if (!r.indication.empty()) j["indication"] = r.indication;
    if (!r.findings_text.empty()) j["findings"] = r.findings_text;
    if (!r.impression_text.empty()) j["impression"] = r.impression_text;
    std::vector<std::string> anns;
    if (r.is_normal) anns.push_back("normal");
    for (const auto& a : r.annotations) anns.push_back(a.raw);
    j["annotations"] = anns;
    return j.dump();
}

inline std::vector<Report> load_corpus(std::istream& is) {
    std::vector<Report> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (str::trim(line).empty()) continue;
        out.push_back(report_from_json_line(line, line_no));
    }
    return out;
}

inline std::vector<Report> load_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    return load_corpus(in);
}

inline void save_corpus(std::ostream& os, const std::vector<Report>& reports) {
    for (const auto& r : reports) os << report_to_json_line(r) << '\n';
}

inline void save_split(std::ostream& os, const CorpusSplit& sp) {
    os << "[train]\n";
    for (const auto& id : sp.train_ids) os << id << '\n';
    os << "[val]\n";
    for (const auto& id : sp.val_ids) os << id << '\n';
    os << "[test]\n";
    for (const auto& id : sp.test_ids) os << id << '\n';
}

inline CorpusSplit load_split(std::istream& is) {
    CorpusSplit sp;
    std::vector<std::string>* cur = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = str::trim(line);
        if (t.empty()) continue;
        if (t == "[train]")
            cur = &sp.train_ids;
        else if (t == "[val]")
            cur = &sp.val_ids;
        else if (t == "[test]")
            cur = &sp.test_ids;
        else if (cur)
            cur->push_back(t);
        else
            throw DataError("split file line " + std::to_string(line_no) + ": id before section header");
    }
    return sp;
}

namespace detail {

inline std::string group_digits(std::size_t v) {
    std::string s = std::to_string(v);
    std::string out;
    int c = 0;
    for (auto it = s.rbegin(); it != s.rend(); ++it) {
        if (c && c % 3 == 0) out += ',';
        out += *it;
        ++c;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace detail

// Aligned table plus machine-readable key=value lines.
inline std::string render_stats(const CorpusStats& st) {
    using detail::fixed2;
    using detail::group_digits;
    std::vector<std::pair<std::string, std::string>> rows = {
        {"# reports", group_digits(st.reports)},
        {"# sentences", group_digits(st.sentences)},
        {"# annotations", group_digits(st.annotations)},
        {"# sentences without annotations", group_digits(st.sentences_without_annotations)},
        {"# sentences with annotations", group_digits(st.sentences_with_annotations)},
        {"# sentences with only one annotation", group_digits(st.sentences_with_one_annotation)},
        {"# sentences with several annotations", group_digits(st.sentences_with_several_annotations)},
        {"average # of words in sentences", fixed2(st.avg_words_per_sentence)},
        {"average # of words in annotations", fixed2(st.avg_words_per_annotation)},
    };
    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    std::ostringstream os;
    for (const auto& [k, v] : rows) os << k << std::string(width - k.size() + 2, ' ') << v << '\n';
    os << '\n';
    os << "reports=" << st.reports << '\n';
    os << "sentences=" << st.sentences << '\n';
    os << "annotations=" << st.annotations << '\n';
    os << "sentences_without_annotations=" << st.sentences_without_annotations << '\n';
    os << "sentences_with_annotations=" << st.sentences_with_annotations << '\n';
    os << "sentences_with_one_annotation=" << st.sentences_with_one_annotation << '\n';
    os << "sentences_with_several_annotations=" << st.sentences_with_several_annotations << '\n';
    os << "avg_words_per_sentence=" << fixed2(st.avg_words_per_sentence) << '\n';
    os << "avg_words_per_annotation=" << fixed2(st.avg_words_per_annotation) << '\n';
    return os.str();
}

} // namespace radannot::corpus
