#pragma once

// Command-line pipeline. Each subcommand parses a flat key=value config
// file plus long flags of the same names (flags win), runs one stage,
// writes its artifacts into the output directory, and records a run
// manifest holding the resolved config, its hash, the seed, and a
// checksum per artifact. Exit codes: 0 ok, 1 usage, 2 data, 3 numerics.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "radannot/common.hpp"
#include "radannot/corpus.hpp"
#include "radannot/embedding.hpp"
#include "radannot/encoder.hpp"
#include "radannot/matcher.hpp"
#include "radannot/metrics.hpp"
#include "radannot/seq2seq/decode.hpp"
#include "radannot/seq2seq/train.hpp"
#include "radannot/synth.hpp"

namespace radannot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

namespace detail {

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) return;
    if (!std::filesystem::exists(path)) throw DataError("missing " + what + " file: " + path);
}

inline std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Collects artifacts as a subcommand runs; finish() writes
// <out>/<command>-manifest.txt once everything else is on disk.
struct RunContext {
    std::string command;
    std::string out_dir = ".";
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> artifact_names;

    RunContext(std::string cmd, std::ostream& o, std::ostream& e)
        : command(std::move(cmd)), out(o), err(e) {}

    std::string path(const std::string& name) const {
        return (std::filesystem::path(out_dir) / name).string();
    }

    std::string artifact(const std::string& name) {
        artifact_names.push_back(name);
        return path(name);
    }

    void write_text(const std::string& name, const std::string& content) {
        std::ofstream f(artifact(name), std::ios::binary);
        if (!f) throw DataError("cannot write artifact: " + path(name));
        f << content;
    }

    void finish(const CLI::App& app) {
        std::string config = app.config_to_str(true, false);
        std::ostringstream m;
        m << "command=" << command << '\n';
        m << "config_hash=" << hex64(fnv1a64(command + "\n" + config)) << '\n';
        if (const CLI::Option* seed = app.get_option_no_throw("--seed"))
            m << "seed=" << seed->as<std::uint64_t>() << '\n';
        m << "[config]\n" << config;
        m << "[artifacts]\n";
        for (const auto& name : artifact_names) {
            std::string bytes = read_file_bytes(path(name));
            m << name << "\tfnv1a64=" << hex64(fnv1a64(bytes.data(), bytes.size()))
              << "\tbytes=" << bytes.size() << '\n';
        }
        std::ofstream f(path(command + "-manifest.txt"), std::ios::binary);
        if (!f) throw DataError("cannot write manifest in: " + out_dir);
        f << m.str();
    }
};

// Parse-and-execute wrapper shared by every subcommand. setup(app, ctx)
// registers options and returns the body to run after parsing.
template <class Setup>
int run_subcommand(const std::string& name, const std::string& summary,
                   std::vector<std::string> args, std::ostream& out, std::ostream& err,
                   Setup&& setup) {
    CLI::App app{summary, "radannot " + name};
    app.set_config("--config", "", "flat key=value config; flags override file values");
    RunContext ctx(name, out, err);
    app.add_option("--out", ctx.out_dir, "output directory for artifacts")->capture_default_str();
    auto body = setup(app, ctx);

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "radannot " << name << ": " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        std::filesystem::create_directories(ctx.out_dir);
        body();
        ctx.finish(app);
        return kExitOk;
    } catch (const NumericalError& e) {
        err << "radannot " << name << ": " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "radannot " << name << ": " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "radannot " << name << ": " << e.what() << '\n';
        return kExitData;
    }
}

inline std::vector<corpus::Report> select_reports(const std::vector<corpus::Report>& all,
                                                  const std::vector<std::string>& ids) {
    std::map<std::string, const corpus::Report*> by_id;
    for (const auto& r : all) by_id[r.id] = &r;
    std::vector<corpus::Report> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("split references unknown report id: " + id);
        out.push_back(*it->second);
    }
    return out;
}

// encoder.txt: key=value lines; only threshold is required to use it
inline double load_encoder_threshold(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open encoder file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = str::trim(line);
        if (t.rfind("threshold=", 0) == 0) {
            try {
                return std::stod(t.substr(10));
            } catch (const std::exception&) {
                throw DataError("encoder file line " + std::to_string(line_no) + ": bad threshold value");
            }
        }
    }
    throw DataError("encoder file has no threshold= line: " + path);
}

// report-level annotation file: "id<TAB>ann; ann; ..."
inline std::map<std::string, std::vector<std::string>> load_annotation_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file: " + path);
    std::map<std::string, std::vector<std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (str::trim(line).empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("annotation file line " + std::to_string(line_no) + ": missing tab separator");
        std::string id = line.substr(0, tab);
        std::vector<std::string> anns;
        for (auto& piece : str::split(line.substr(tab + 1), ';')) {
            std::string t = str::trim(piece);
            if (!t.empty()) anns.push_back(std::move(t));
        }
        out[id] = std::move(anns);
    }
    return out;
}

// scoring form: slashes dropped, terms split to words, annotations
// concatenated in order
inline std::vector<std::string> annotation_tokens(const std::vector<std::string>& annotations) {
    std::vector<std::string> toks;
    for (const auto& a : annotations) {
        std::string flat = a;
        for (char& c : flat)
            if (c == '/') c = ' ';
        for (auto& t : text::tokenize(flat)) toks.push_back(std::move(t));
    }
    return toks;
}

} // namespace detail

// ---- subcommands ----

inline int cmd_synth(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto sc = std::make_shared<synth::SynthConfig>();
        app.add_option("--seed", sc->seed, "generator seed")->capture_default_str();
        app.add_option("--reports", sc->n_reports, "number of reports")->capture_default_str();
        app.add_option("--min-sentences", sc->min_sentences, "minimum sentences per report")->capture_default_str();
        app.add_option("--max-sentences", sc->max_sentences, "maximum sentences per report")->capture_default_str();
        app.add_option("--negative-fraction", sc->negative_fraction, "share of sentences without annotations")
            ->capture_default_str();
        app.add_option("--synonym-fraction", sc->synonym_fraction, "share of annotations needing the dictionary")
            ->capture_default_str();
        app.add_option("--embedding-fraction", sc->embedding_fraction, "share of annotations needing embeddings")
            ->capture_default_str();
        return [&ctx, sc]() {
            synth::SynthCorpus c = synth::generate(*sc);
            {
                std::ofstream f(ctx.artifact("corpus.jsonl"), std::ios::binary);
                corpus::save_corpus(f, c.reports);
            }
            {
                std::ofstream f(ctx.artifact("synonyms.tsv"), std::ios::binary);
                match::save_synonyms(f, c.dict);
            }
            {
                std::ofstream f(ctx.artifact("truth.tsv"), std::ios::binary);
                match::save_matches(f, c.ground_truth);
            }
            ctx.write_text("stats.txt", corpus::render_stats(c.stats));
            ctx.out << "reports=" << c.reports.size() << '\n'
                    << "annotations=" << c.stats.annotations << '\n'
                    << "sentences=" << c.stats.sentences << '\n';
        };
    };
    return detail::run_subcommand("synth", "generate a synthetic report corpus with ground truth", std::move(args),
                                  out, err, setup);
}

inline int cmd_ingest(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto matches_path = std::make_shared<std::string>();
        auto keep_normals = std::make_shared<bool>(false);
        app.add_option("--corpus", *corpus_path, "corpus file, one JSON record per line")->required();
        app.add_option("--matches", *matches_path, "matched pairs for the per-sentence statistics");
        app.add_option("--keep-normals", *keep_normals, "keep reports marked normal")->capture_default_str();
        return [&ctx, corpus_path, matches_path, keep_normals]() {
            detail::require_file(*corpus_path, "corpus");
            detail::require_file(*matches_path, "matches");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            std::size_t before = reports.size();
            if (!*keep_normals) reports = corpus::filter_normals(reports);
            std::vector<match::MatchedPair> matches;
            if (!matches_path->empty()) matches = match::load_matches_file(*matches_path);
            corpus::CorpusStats st = corpus::compute_stats(reports, matches);
            {
                std::ofstream f(ctx.artifact("filtered.jsonl"), std::ios::binary);
                corpus::save_corpus(f, reports);
            }
            std::string stats = corpus::render_stats(st);
            ctx.write_text("stats.txt", stats);
            ctx.out << "parsed=" << before << '\n' << "retained=" << reports.size() << '\n' << stats;
        };
    };
    return detail::run_subcommand("ingest", "parse, preprocess, filter, and summarize a corpus", std::move(args),
                                  out, err, setup);
}

inline int cmd_split(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto train = std::make_shared<double>(0.8);
        auto val = std::make_shared<double>(0.1);
        auto test = std::make_shared<double>(0.1);
        auto seed = std::make_shared<std::uint64_t>(1);
        app.add_option("--corpus", *corpus_path, "corpus file")->required();
        app.add_option("--train", *train, "training fraction")->capture_default_str();
        app.add_option("--val", *val, "validation fraction")->capture_default_str();
        app.add_option("--test", *test, "test fraction")->capture_default_str();
        app.add_option("--seed", *seed, "shuffle seed")->capture_default_str();
        return [&ctx, corpus_path, train, val, test, seed]() {
            detail::require_file(*corpus_path, "corpus");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            corpus::CorpusSplit sp = corpus::make_splits(reports, *train, *val, *test, *seed);
            std::ofstream f(ctx.artifact("split.txt"), std::ios::binary);
            corpus::save_split(f, sp);
            ctx.out << "train=" << sp.train_ids.size() << '\n'
                    << "val=" << sp.val_ids.size() << '\n'
                    << "test=" << sp.test_ids.size() << '\n';
        };
    };
    return detail::run_subcommand("split", "deterministically partition a corpus", std::move(args), out, err, setup);
}

inline int cmd_train_embed(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto ec = std::make_shared<embed::EmbedConfig>();
        app.add_option("--corpus", *corpus_path, "corpus file")->required();
        app.add_option("--dim", ec->dim, "vector dimensionality")->capture_default_str();
        app.add_option("--window", ec->window, "context window")->capture_default_str();
        app.add_option("--negative", ec->negative_samples, "negative samples per target")->capture_default_str();
        app.add_option("--epochs", ec->epochs, "training epochs")->capture_default_str();
        app.add_option("--min-count", ec->min_count, "minimum word frequency")->capture_default_str();
        app.add_option("--char-ngram-min", ec->char_ngram_min, "shortest character n-gram")->capture_default_str();
        app.add_option("--char-ngram-max", ec->char_ngram_max, "longest character n-gram")->capture_default_str();
        app.add_option("--buckets", ec->buckets, "subword hash buckets")->capture_default_str();
        app.add_option("--learning-rate", ec->learning_rate, "initial learning rate")->capture_default_str();
        app.add_option("--seed", ec->seed, "training seed")->capture_default_str();
        return [&ctx, corpus_path, ec]() {
            detail::require_file(*corpus_path, "corpus");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            std::vector<std::vector<std::string>> streams;
            for (const auto& r : reports) {
                if (!r.has_text()) continue;
                for (const auto& s : corpus::split_sentences(r)) streams.push_back(s.tokens);
            }
            embed::EmbeddingTable table = embed::train_embeddings(streams, *ec);
            embed::save_embeddings_file(ctx.artifact("embeddings.bin"), table);
            ctx.out << "words=" << table.words.size() << '\n' << "dim=" << table.dim() << '\n';
        };
    };
    return detail::run_subcommand("train-embed", "train subword embeddings on report text", std::move(args), out,
                                  err, setup);
}

inline int cmd_fit_encoder(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto matches_path = std::make_shared<std::string>();
        auto embeddings_path = std::make_shared<std::string>();
        auto seed = std::make_shared<std::uint64_t>(1);
        app.add_option("--corpus", *corpus_path, "corpus file")->required();
        app.add_option("--matches", *matches_path, "manually matched pairs (calibration labels)")->required();
        app.add_option("--embeddings", *embeddings_path, "trained embedding file")->required();
        app.add_option("--seed", *seed, "negative-pair sampling seed")->capture_default_str();
        return [&ctx, corpus_path, matches_path, embeddings_path, seed]() {
            detail::require_file(*corpus_path, "corpus");
            detail::require_file(*matches_path, "matches");
            detail::require_file(*embeddings_path, "embeddings");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            std::vector<match::MatchedPair> matches = match::load_matches_file(*matches_path);
            embed::EmbeddingTable table = embed::load_embeddings_file(*embeddings_path);
            embed::SentenceEncoder enc{&table, 0.0};
            std::vector<embed::LabeledPair> pairs = embed::make_encoder_pairs(reports, matches, *seed);
            enc.threshold = embed::calibrate_threshold(enc, pairs);
            std::size_t correct = 0;
            for (const auto& p : pairs) {
                int predicted = embed::pair_similarity(enc, p) > enc.threshold ? 1 : 0;
                if (predicted == p.label) ++correct;
            }
            double accuracy = pairs.empty() ? 0.0 : double(correct) / double(pairs.size());
            std::ostringstream text;
            text << "threshold=" << detail::full_precision(enc.threshold) << '\n'
                 << "pairs=" << pairs.size() << '\n'
                 << "accuracy=" << detail::full_precision(accuracy) << '\n'
                 << "embeddings=" << *embeddings_path << '\n';
            ctx.write_text("encoder.txt", text.str());
            ctx.out << text.str();
        };
    };
    return detail::run_subcommand("fit-encoder", "calibrate the sentence-similarity threshold", std::move(args),
                                  out, err, setup);
}

inline int cmd_match(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto synonyms_path = std::make_shared<std::string>();
        auto embeddings_path = std::make_shared<std::string>();
        auto encoder_path = std::make_shared<std::string>();
        auto cfg = std::make_shared<match::MatcherConfig>();
        auto random_baseline = std::make_shared<bool>(false);
        auto seed = std::make_shared<std::uint64_t>(1);
        app.add_option("--corpus", *corpus_path, "corpus file")->required();
        app.add_option("--synonyms", *synonyms_path, "synonym dictionary (term<TAB>synonym lines)");
        app.add_option("--embeddings", *embeddings_path, "embedding file for neighbors and the fallback");
        app.add_option("--encoder-file", *encoder_path, "calibrated encoder (threshold=...)");
        app.add_option("--use-ngrams", cfg->use_ngrams, "expand headings with word n-grams")->capture_default_str();
        app.add_option("--use-stems", cfg->use_stems, "expand headings with Porter stems")->capture_default_str();
        app.add_option("--use-synonyms", cfg->use_synonyms, "expand with dictionary synonyms")->capture_default_str();
        app.add_option("--use-neighbors", cfg->use_neighbors, "expand with embedding neighbors")
            ->capture_default_str();
        app.add_option("--use-encoder", cfg->use_encoder_fallback, "fall back to sentence similarity")
            ->capture_default_str();
        app.add_option("--k", cfg->k, "neighbors per heading word")->capture_default_str();
        app.add_option("--random-baseline", *random_baseline, "pick sentences uniformly at random instead")
            ->capture_default_str();
        app.add_option("--seed", *seed, "random-baseline seed")->capture_default_str();
        return [&ctx, corpus_path, synonyms_path, embeddings_path, encoder_path, cfg, random_baseline, seed]() {
            detail::require_file(*corpus_path, "corpus");
            detail::require_file(*synonyms_path, "synonyms");
            detail::require_file(*embeddings_path, "embeddings");
            detail::require_file(*encoder_path, "encoder");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);

            if (*random_baseline) {
                std::vector<match::MatchedPair> pairs = match::random_baseline(reports, *seed);
                std::ofstream f(ctx.artifact("matches.tsv"), std::ios::binary);
                match::save_matches(f, pairs);
                ctx.out << "matched=" << pairs.size() << '\n';
                return;
            }

            match::SynonymDict dict;
            if (!synonyms_path->empty()) dict = match::load_synonyms_file(*synonyms_path);
            embed::EmbeddingTable table;
            bool have_table = !embeddings_path->empty();
            if (have_table) table = embed::load_embeddings_file(*embeddings_path);
            embed::SentenceEncoder enc{have_table ? &table : nullptr, 0.0};
            bool have_encoder = have_table && !encoder_path->empty();
            if (have_encoder) enc.threshold = detail::load_encoder_threshold(*encoder_path);
            if (cfg->use_encoder_fallback && !encoder_path->empty() && !have_table)
                throw BadConfig("the encoder fallback needs --embeddings");

            match::CorpusMatch m =
                match::match_corpus(reports, &dict, have_table ? &table : nullptr,
                                    have_encoder ? &enc : nullptr, *cfg);
            std::ofstream f(ctx.artifact("matches.tsv"), std::ios::binary);
            match::save_matches(f, m.pairs);
            ctx.out << "matched=" << (m.pairs.size() - m.unmatched) << '\n'
                    << "unmatched=" << m.unmatched << '\n'
                    << "branch-unique=" << m.branch_counts[0] << '\n'
                    << "branch-heading-only=" << m.branch_counts[1] << '\n'
                    << "branch-subheading=" << m.branch_counts[2] << '\n'
                    << "branch-encoder=" << m.branch_counts[3] << '\n';
        };
    };
    return detail::run_subcommand("match", "match each annotation to its report sentence", std::move(args), out,
                                  err, setup);
}

inline int cmd_eval_match(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto predicted_path = std::make_shared<std::string>();
        auto truth_path = std::make_shared<std::string>();
        auto ablation = std::make_shared<bool>(false);
        auto corpus_path = std::make_shared<std::string>();
        auto synonyms_path = std::make_shared<std::string>();
        auto embeddings_path = std::make_shared<std::string>();
        auto encoder_path = std::make_shared<std::string>();
        auto seed = std::make_shared<std::uint64_t>(1);
        app.add_option("--predicted", *predicted_path, "predicted matches file");
        app.add_option("--truth", *truth_path, "ground-truth matches file")->required();
        app.add_option("--ablation", *ablation, "run the candidate-source ablation instead")->capture_default_str();
        app.add_option("--corpus", *corpus_path, "corpus file (ablation mode)");
        app.add_option("--synonyms", *synonyms_path, "synonym dictionary (ablation mode)");
        app.add_option("--embeddings", *embeddings_path, "embedding file (ablation mode)");
        app.add_option("--encoder-file", *encoder_path, "calibrated encoder (ablation mode)");
        app.add_option("--seed", *seed, "random-baseline seed (ablation mode)")->capture_default_str();
        return [&ctx, predicted_path, truth_path, ablation, corpus_path, synonyms_path, embeddings_path,
                encoder_path, seed]() {
            detail::require_file(*predicted_path, "predicted matches");
            detail::require_file(*truth_path, "truth matches");
            std::vector<match::MatchedPair> truth = match::load_matches_file(*truth_path);

            if (!*ablation) {
                if (predicted_path->empty()) throw BadConfig("--predicted is required unless --ablation is set");
                std::vector<match::MatchedPair> predicted = match::load_matches_file(*predicted_path);
                double acc = match::evaluate_matching(predicted, truth);
                std::string text = "accuracy=" + detail::full_precision(acc) + "\n";
                ctx.write_text("eval-match.txt", text);
                ctx.out << text;
                return;
            }

            if (corpus_path->empty() || embeddings_path->empty() || encoder_path->empty())
                throw BadConfig("ablation mode needs --corpus, --embeddings, and --encoder-file");
            detail::require_file(*corpus_path, "corpus");
            detail::require_file(*synonyms_path, "synonyms");
            detail::require_file(*embeddings_path, "embeddings");
            detail::require_file(*encoder_path, "encoder");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            match::SynonymDict dict;
            if (!synonyms_path->empty()) dict = match::load_synonyms_file(*synonyms_path);
            embed::EmbeddingTable table = embed::load_embeddings_file(*embeddings_path);
            embed::SentenceEncoder enc{&table, detail::load_encoder_threshold(*encoder_path)};
            std::vector<match::AblationRow> rows = match::run_ablation(reports, truth, &dict, &table, &enc, *seed);
            std::string text = match::render_ablation(rows);
            ctx.write_text("ablation.txt", text);
            ctx.out << text;
        };
    };
    return detail::run_subcommand("eval-match", "score matches against ground truth", std::move(args), out, err,
                                  setup);
}

inline int cmd_train(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto matches_path = std::make_shared<std::string>();
        auto split_path = std::make_shared<std::string>();
        auto paragraph = std::make_shared<bool>(false);
        auto mc = std::make_shared<seq2seq::ModelConfig>();
        auto tc = std::make_shared<seq2seq::TrainConfig>();
        app.add_option("--corpus", *corpus_path, "corpus file")->required();
        app.add_option("--matches", *matches_path, "sentence-annotation matches (weak labels)");
        app.add_option("--split", *split_path, "split file; trains on [train], validates on [val]");
        app.add_option("--paragraph", *paragraph, "one example per report instead of per sentence")
            ->capture_default_str();
        app.add_option("--embed-dim", mc->embed_dim, "token embedding width")->capture_default_str();
        app.add_option("--enc-hidden", mc->enc_hidden, "encoder hidden units per direction")->capture_default_str();
        app.add_option("--enc-layers", mc->enc_layers, "encoder layers")->capture_default_str();
        app.add_option("--dec-hidden", mc->dec_hidden, "decoder hidden units")->capture_default_str();
        app.add_option("--attn-dim", mc->attn_dim, "attention width (0: decoder width)")->capture_default_str();
        app.add_option("--learning-rate", tc->learning_rate, "Adam learning rate")->capture_default_str();
        app.add_option("--batch-size", tc->batch_size, "examples per update")->capture_default_str();
        app.add_option("--grad-clip", tc->grad_clip_norm, "global gradient norm cap")->capture_default_str();
        app.add_option("--epochs", tc->epochs, "training epochs")->capture_default_str();
        app.add_option("--beam", tc->beam_size, "beam width stored with the model")->capture_default_str();
        app.add_option("--max-decode-len", tc->max_decode_len, "decode length stored with the model")
            ->capture_default_str();
        app.add_option("--min-token-freq", tc->min_token_freq, "vocabulary frequency floor")->capture_default_str();
        app.add_option("--seed", tc->seed, "initialization and shuffle seed")->capture_default_str();
        return [&ctx, corpus_path, matches_path, split_path, paragraph, mc, tc]() {
            detail::require_file(*corpus_path, "corpus");
            detail::require_file(*matches_path, "matches");
            detail::require_file(*split_path, "split");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            if (!*paragraph && matches_path->empty())
                throw BadConfig("sentence-level training needs --matches (or pass --paragraph true)");
            std::vector<match::MatchedPair> matches;
            if (!matches_path->empty()) matches = match::load_matches_file(*matches_path);

            std::vector<corpus::Report> train_reports = reports;
            std::vector<corpus::Report> val_reports;
            if (!split_path->empty()) {
                std::ifstream f(*split_path);
                corpus::CorpusSplit sp = corpus::load_split(f);
                train_reports = detail::select_reports(reports, sp.train_ids);
                val_reports = detail::select_reports(reports, sp.val_ids);
            }

            seq2seq::Vocab v = seq2seq::vocab_from_reports(train_reports, tc->min_token_freq);
            auto examples_of = [&](const std::vector<corpus::Report>& rs) {
                return *paragraph ? seq2seq::make_paragraph_examples(v, rs)
                                  : seq2seq::make_examples(v, rs, matches);
            };
            std::vector<seq2seq::Example> train_set = examples_of(train_reports);
            std::vector<seq2seq::Example> val_set = examples_of(val_reports);

            seq2seq::PointerGenModel model = seq2seq::init_model(v, *mc, tc->seed);
            seq2seq::TrainResult res = seq2seq::train(model, train_set, val_set, *tc);

            {
                std::ofstream f(ctx.artifact("model.bin"), std::ios::binary);
                seq2seq::save_model(f, model, *tc);
            }
            std::ostringstream losses;
            losses << "epoch\ttrain\tval\n";
            for (std::size_t i = 0; i < res.train_losses.size(); ++i)
                losses << (i + 1) << '\t' << detail::full_precision(res.train_losses[i]) << '\t'
                       << detail::full_precision(res.val_losses[i]) << '\n';
            ctx.write_text("losses.txt", losses.str());
            ctx.out << "vocab=" << v.size() << '\n'
                    << "train-examples=" << train_set.size() << '\n'
                    << "val-examples=" << val_set.size() << '\n'
                    << "best-epoch=" << (res.best_epoch + 1) << '\n'
                    << "best-val-loss=" << detail::full_precision(res.best_val_loss) << '\n';
        };
    };
    return detail::run_subcommand("train", "train the annotation generator", std::move(args), out, err, setup);
}

inline int cmd_annotate(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto model_path = std::make_shared<std::string>();
        auto corpus_path = std::make_shared<std::string>();
        auto beam = std::make_shared<int>(0);
        auto max_len = std::make_shared<int>(0);
        auto paragraph = std::make_shared<bool>(false);
        auto per_sentence = std::make_shared<bool>(false);
        app.add_option("--model", *model_path, "trained model file")->required();
        app.add_option("--corpus", *corpus_path, "corpus file")->required();
        app.add_option("--beam", *beam, "beam width (0: value stored in the model)")->capture_default_str();
        app.add_option("--max-len", *max_len, "decode length cap (0: stored value)")->capture_default_str();
        app.add_option("--paragraph", *paragraph, "decode whole reports instead of sentences")
            ->capture_default_str();
        app.add_option("--per-sentence", *per_sentence, "also write one line per sentence")->capture_default_str();
        return [&ctx, model_path, corpus_path, beam, max_len, paragraph, per_sentence]() {
            detail::require_file(*model_path, "model");
            detail::require_file(*corpus_path, "corpus");
            std::ifstream mf(*model_path, std::ios::binary);
            if (!mf) throw DataError("cannot open model file: " + *model_path);
            seq2seq::TrainConfig tc;
            seq2seq::PointerGenModel m = seq2seq::load_model(mf, &tc);
            int b = *beam > 0 ? *beam : tc.beam_size;
            int len = *max_len > 0 ? *max_len : tc.max_decode_len;

            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            std::ostringstream lines, sentence_lines;
            for (const auto& r : reports) {
                if (!r.has_text()) continue;
                std::vector<std::string> anns = seq2seq::annotate_report(m, r, b, len, *paragraph);
                lines << seq2seq::annotation_line(r.id, anns) << '\n';
                if (*per_sentence && !*paragraph) {
                    for (const auto& s : corpus::split_sentences(r)) {
                        seq2seq::SourceEncoding src = seq2seq::encode_source(m.vocab, s.tokens);
                        seq2seq::Encoded enc = seq2seq::encode(m, src);
                        seq2seq::Hypothesis hyp = seq2seq::beam_search(m, enc, b, len);
                        std::vector<std::string> sa = seq2seq::render_annotations(m.vocab, src, hyp.tokens);
                        sentence_lines << r.id << '\t' << s.index << '\t' << str::join(sa, "; ") << '\n';
                    }
                }
            }
            ctx.write_text("annotations.tsv", lines.str());
            if (*per_sentence && !*paragraph) ctx.write_text("sentence-annotations.tsv", sentence_lines.str());
            ctx.out << "reports=" << reports.size() << '\n';
        };
    };
    return detail::run_subcommand("annotate", "generate annotations for every report", std::move(args), out, err,
                                  setup);
}

inline int cmd_evaluate(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    auto setup = [](CLI::App& app, detail::RunContext& ctx) {
        auto corpus_path = std::make_shared<std::string>();
        auto annotations_path = std::make_shared<std::string>();
        auto sentence_path = std::make_shared<std::string>();
        auto matches_path = std::make_shared<std::string>();
        app.add_option("--corpus", *corpus_path, "corpus with gold annotations")->required();
        app.add_option("--annotations", *annotations_path, "generated report-level annotations")->required();
        app.add_option("--sentence-annotations", *sentence_path, "generated per-sentence annotations");
        app.add_option("--matches", *matches_path, "gold matches, enables the per-sentence table");
        return [&ctx, corpus_path, annotations_path, sentence_path, matches_path]() {
            detail::require_file(*corpus_path, "corpus");
            detail::require_file(*annotations_path, "annotations");
            detail::require_file(*sentence_path, "sentence annotations");
            detail::require_file(*matches_path, "matches");
            std::vector<corpus::Report> reports = corpus::load_corpus_file(*corpus_path);
            auto generated = detail::load_annotation_lines(*annotations_path);

            std::vector<metrics::EvalPair> report_pairs;
            for (const auto& r : reports) {
                if (r.annotations.empty()) continue;
                metrics::EvalPair p;
                std::vector<std::string> gold;
                for (const auto& a : r.annotations) gold.push_back(a.raw);
                p.reference = detail::annotation_tokens(gold);
                auto it = generated.find(r.id);
                if (it != generated.end()) p.candidate = detail::annotation_tokens(it->second);
                if (!p.reference.empty()) report_pairs.push_back(std::move(p));
            }
            if (report_pairs.empty()) throw NoEligiblePairs("no report carries gold annotations");
            metrics::EvalSummary report_summary = metrics::evaluate_pairs(report_pairs);
            std::string text = metrics::render_evaluation(report_summary, "per-report");

            if (!sentence_path->empty() && !matches_path->empty()) {
                auto tokens_of_sentence = [](const std::string& joined) {
                    std::vector<std::string> anns;
                    for (auto& piece : str::split(joined, ';')) {
                        std::string t = str::trim(piece);
                        if (!t.empty()) anns.push_back(std::move(t));
                    }
                    return detail::annotation_tokens(anns);
                };
                std::map<std::pair<std::string, int>, std::vector<std::string>> generated_by_sentence;
                {
                    std::ifstream f(*sentence_path);
                    if (!f) throw DataError("cannot open sentence annotation file: " + *sentence_path);
                    std::string line;
                    std::size_t line_no = 0;
                    while (std::getline(f, line)) {
                        ++line_no;
                        if (str::trim(line).empty()) continue;
                        std::vector<std::string> cols = str::split(line, '\t');
                        if (cols.size() < 2)
                            throw DataError("sentence annotation line " + std::to_string(line_no) +
                                            ": expected id<TAB>index<TAB>annotations");
                        int sent_idx = 0;
                        try {
                            sent_idx = std::stoi(cols[1]);
                        } catch (const std::exception&) {
                            throw DataError("sentence annotation line " + std::to_string(line_no) +
                                            ": bad sentence index \"" + cols[1] + "\"");
                        }
                        generated_by_sentence[{cols[0], sent_idx}] =
                            tokens_of_sentence(cols.size() > 2 ? cols[2] : "");
                    }
                }
                std::vector<match::MatchedPair> matches = match::load_matches_file(*matches_path);
                std::map<std::string, const corpus::Report*> by_id;
                for (const auto& r : reports) by_id[r.id] = &r;
                std::map<std::pair<std::string, int>, std::vector<std::string>> gold_by_sentence;
                for (const auto& mp : matches) {
                    if (mp.label != 1 || mp.unmatched()) continue;
                    auto it = by_id.find(mp.report_id);
                    if (it == by_id.end() || mp.annotation_index >= int(it->second->annotations.size())) continue;
                    gold_by_sentence[{mp.report_id, mp.sentence_index}].push_back(
                        it->second->annotations[std::size_t(mp.annotation_index)].raw);
                }
                std::vector<metrics::EvalPair> sentence_pairs;
                for (const auto& [key, gold] : gold_by_sentence) {
                    metrics::EvalPair p;
                    p.reference = detail::annotation_tokens(gold);
                    auto it = generated_by_sentence.find(key);
                    if (it != generated_by_sentence.end()) p.candidate = it->second;
                    if (!p.reference.empty()) sentence_pairs.push_back(std::move(p));
                }
                if (!sentence_pairs.empty())
                    text += metrics::render_evaluation(metrics::evaluate_pairs(sentence_pairs), "per-sentence");
            }

            ctx.write_text("evaluation.txt", text);
            ctx.out << text;
        };
    };
    return detail::run_subcommand("evaluate", "score generated annotations against gold", std::move(args), out, err,
                                  setup);
}

inline const std::map<std::string, int (*)(std::vector<std::string>, std::ostream&, std::ostream&)>&
command_table() {
    static const std::map<std::string, int (*)(std::vector<std::string>, std::ostream&, std::ostream&)> table = {
        {"synth", cmd_synth},           {"ingest", cmd_ingest},
        {"split", cmd_split},           {"train-embed", cmd_train_embed},
        {"fit-encoder", cmd_fit_encoder}, {"match", cmd_match},
        {"eval-match", cmd_eval_match}, {"train", cmd_train},
        {"annotate", cmd_annotate},     {"evaluate", cmd_evaluate},
    };
    return table;
}

inline void print_usage(std::ostream& os) {
    os << "usage: radannot <command> [options]\n"
          "commands:\n"
          "  synth        generate a synthetic report corpus with ground truth\n"
          "  ingest       parse, preprocess, filter, and summarize a corpus\n"
          "  split        deterministically partition a corpus\n"
          "  train-embed  train subword embeddings on report text\n"
          "  fit-encoder  calibrate the sentence-similarity threshold\n"
          "  match        match each annotation to its report sentence\n"
          "  eval-match   score matches against ground truth (or run the ablation)\n"
          "  train        train the annotation generator\n"
          "  annotate     generate annotations for every report\n"
          "  evaluate     score generated annotations against gold\n"
          "run 'radannot <command> --help' for the command's options.\n";
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    if (args.empty()) {
        print_usage(err);
        return kExitUsage;
    }
    if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        print_usage(out);
        return kExitOk;
    }
    auto it = command_table().find(args[0]);
    if (it == command_table().end()) {
        err << "radannot: unknown command \"" << args[0] << "\"\n";
        print_usage(err);
        return kExitUsage;
    }
    return it->second(std::vector<std::string>(args.begin() + 1, args.end()), out, err);
}

} // namespace radannot::cli
