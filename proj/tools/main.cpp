// Command-line frontend: morphological analysis, tagger/MD training, standard
// and hybrid disambiguation, tagging, form-anchored evaluation and OOTV
// analysis. Every file-producing command also writes a <output>.manifest.json
// recording the exact inputs, options and seed of the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "morphtag/corpus_io.hpp"
#include "morphtag/eval.hpp"
#include "morphtag/md.hpp"
#include "morphtag/tagger.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;
using namespace morphtag;

// --- plumbing ---------------------------------------------------------------

template <typename Fn>
auto with_input(const std::string& path, Fn fn) {
  if (path == "-") return fn(std::cin);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return fn(in);
}

template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  fn(out);
}

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& output_path, const std::string& command,
                    const std::vector<std::string>& inputs, const json& options,
                    std::uint64_t seed = 0) {
  if (output_path == "-") return;
  json m;
  m["command"] = command;
  m["tool_version"] = kVersion;
  m["timestamp"] = timestamp_utc();
  m["seed"] = seed;
  m["inputs"] = inputs;
  m["options"] = options;
  std::ofstream out(output_path + ".manifest.json");
  out << m.dump(2) << "\n";
}

CorpusSplit read_token_corpus_at(const std::string& path) {
  return with_input(path, [&](std::istream& in) { return read_token_corpus(in, path); });
}

CorpusSplit read_morpheme_corpus_at(const std::string& path) {
  return with_input(path, [&](std::istream& in) { return read_morpheme_corpus(in, path); });
}

std::vector<Sentence> read_token_lines_at(const std::string& path) {
  return with_input(path, [&](std::istream& in) { return read_token_lines(in); });
}

Lexicon read_lexicon_at(const std::string& path) {
  return with_input(path, [&](std::istream& in) { return read_lexicon(in); });
}

DenseFeatureTable read_dense_at(const std::string& path) {
  return with_input(path, [&](std::istream& in) { return read_dense_features(in); });
}

enum class FileKind { token_single, token_multi, morpheme };

FileKind sniff_file_kind(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::string line;
  bool token_file = false, any_caret = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tabs = std::count(line.begin(), line.end(), '\t');
    if (tabs == 3 && !token_file) return FileKind::morpheme;
    if (tabs != 1) throw DataError(path + ": unrecognized format (expected 2 or 4 tab-separated columns)");
    token_file = true;
    any_caret = any_caret || line.find('^') != std::string::npos;
  }
  if (!token_file) throw DataError(path + ": empty file");
  return any_caret ? FileKind::token_multi : FileKind::token_single;
}

// --- report printing ----------------------------------------------------------

void print_report(std::ostream& out, const std::string& title, const EvalReport& r) {
  out << "== " << title << "\n";
  out << std::left << std::setw(14) << "category" << std::right << std::setw(9) << "P"
      << std::setw(9) << "R" << std::setw(9) << "F1" << std::setw(7) << "gold" << std::setw(7)
      << "pred" << std::setw(7) << "match" << "\n";
  auto row = [&](const std::string& name, double p, double rec, double f1, std::size_t g,
                 std::size_t pr, std::size_t m) {
    out << std::left << std::setw(14) << name << std::right << std::fixed << std::setprecision(2)
        << std::setw(9) << p << std::setw(9) << rec << std::setw(9) << f1 << std::setw(7) << g
        << std::setw(7) << pr << std::setw(7) << m << "\n";
    out.unsetf(std::ios::fixed);
  };
  row("ALL", r.precision, r.recall, r.f1, r.gold_total, r.pred_total, r.matched_total);
  for (const auto& [cat, c] : r.by_category) {
    double p = c.pred == 0 ? 0.0 : 100.0 * double(c.matched) / double(c.pred);
    double rec = c.gold == 0 ? 0.0 : 100.0 * double(c.matched) / double(c.gold);
    double f1 = (p + rec) == 0 ? 0.0 : 2 * p * rec / (p + rec);
    row(cat, p, rec, f1, c.gold, c.pred, c.matched);
  }
}

void print_kv(std::ostream& out, const std::string& metric, const std::string& category, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  out << metric << '\t' << category << '\t' << buf << "\n";
}

void print_report_kv(std::ostream& out, const std::string& scope, const EvalReport& r) {
  print_kv(out, scope + ".precision", "ALL", r.precision);
  print_kv(out, scope + ".recall", "ALL", r.recall);
  print_kv(out, scope + ".f1", "ALL", r.f1);
  for (const auto& [cat, c] : r.by_category) {
    double p = c.pred == 0 ? 0.0 : 100.0 * double(c.matched) / double(c.pred);
    double rec = c.gold == 0 ? 0.0 : 100.0 * double(c.matched) / double(c.gold);
    double f1 = (p + rec) == 0 ? 0.0 : 2 * p * rec / (p + rec);
    print_kv(out, scope + ".f1", cat, f1);
    (void)p;
    (void)rec;
  }
}

// --- subcommand options ---------------------------------------------------------

struct AnalyzeOpts {
  std::string input, lexicon, output = "-";
};

struct TrainOpts {
  std::string corpus, output, variant, mode = "perceptron";
  std::string lexicon, dense;
  int epochs = -1;
  double learning_rate = -1, l2 = -1;
  std::uint64_t seed = 1;
  bool no_average = false;
  int char_ngrams = 0;
};

struct DisambiguateOpts {
  std::string input, lexicon, md_model, mode = "standard";
  std::string ner_model, output = "-", fallback_report, dense;
};

struct TagOpts {
  std::string model, input, output = "-", dense;
};

struct EvaluateOpts {
  std::string gold, level = "token";
  std::vector<std::string> preds;
  std::string morphemes;          // segmentation for token-multi at morph level
  std::string gold_tokens;        // parallel token file for a morph-level gold
  std::string gold_morphemes;     // parallel morpheme file for OOTV at token level
  std::string ootv_vocab;         // training morpheme corpus
  std::string ootv_vocab_tokens;  // parallel training token corpus
};

struct OotvOpts {
  std::string corpus, tokens, vocab, vocab_tokens;
};

struct ValidateOpts {
  std::string tokens, morphemes;
};

// --- command implementations -----------------------------------------------------

void run_analyze(const AnalyzeOpts& o) {
  Lexicon lexicon = read_lexicon_at(o.lexicon);
  std::vector<Sentence> sentences = read_token_lines_at(o.input);
  std::vector<SentenceLattice> lattices;
  lattices.reserve(sentences.size());
  for (const Sentence& s : sentences) lattices.push_back(analyze(s.tokens, lexicon));
  with_output(o.output, [&](std::ostream& out) { write_lattices(lattices, out); });
  write_manifest(o.output, "analyze", {o.input, o.lexicon},
                 json{{"input", o.input}, {"lexicon", o.lexicon}});
}

TrainConfig make_train_config(const TrainOpts& o, Variant variant) {
  TrainConfig config = TrainConfig::defaults_for(variant, parse_train_mode(o.mode));
  if (o.epochs > 0) config.epochs = o.epochs;
  if (o.learning_rate > 0) config.learning_rate = o.learning_rate;
  if (o.l2 >= 0) config.l2 = o.l2;
  config.seed = o.seed;
  config.average = !o.no_average;
  config.templates.char_ngram_max = o.char_ngrams;
  return config;
}

void run_train(const TrainOpts& o) {
  json options{{"variant", o.variant}, {"mode", o.mode}, {"corpus", o.corpus}};
  if (o.variant == "md") {
    if (o.lexicon.empty()) throw DataError("training the md variant requires --lexicon");
    CorpusSplit corpus = read_morpheme_corpus_at(o.corpus);
    Lexicon lexicon = read_lexicon_at(o.lexicon);
    TrainConfig config = make_train_config(o, Variant::morpheme);
    MdModel model = train_md(corpus.sentences, lexicon, config);
    with_output(o.output, [&](std::ostream& out) { save_md_model(model, out); });
    options["epochs"] = config.epochs;
    write_manifest(o.output, "train", {o.corpus, o.lexicon}, options, o.seed);
    return;
  }
  Variant variant = parse_variant(o.variant);
  CorpusSplit corpus = variant == Variant::morpheme ? read_morpheme_corpus_at(o.corpus)
                                                    : read_token_corpus_at(o.corpus);
  TrainConfig config = make_train_config(o, variant);
  DenseFeatureTable dense;
  const DenseFeatureTable* dense_ptr = nullptr;
  if (!o.dense.empty()) {
    dense = read_dense_at(o.dense);
    config.templates.dense = true;
    dense_ptr = &dense;
    options["dense"] = o.dense;
  }
  ChainModel model = train(corpus.sentences, variant, config, dense_ptr);
  with_output(o.output, [&](std::ostream& out) { save_model(model, out); });
  options["epochs"] = config.epochs;
  options["learning_rate"] = config.learning_rate;
  write_manifest(o.output, "train", {o.corpus}, options, o.seed);
}

void run_disambiguate(const DisambiguateOpts& o) {
  Lexicon lexicon = read_lexicon_at(o.lexicon);
  MdModel md = with_input(o.md_model, [](std::istream& in) { return load_md_model(in); });
  std::vector<Sentence> sentences = read_token_lines_at(o.input);

  ChainModel ner;
  DenseFeatureTable dense;
  const DenseFeatureTable* dense_ptr = nullptr;
  bool hybrid = o.mode == "hybrid";
  if (hybrid) {
    ner = with_input(o.ner_model, [](std::istream& in) { return load_model(in); });
    require_variant(ner, Variant::token_multi, "hybrid disambiguation");
    if (!o.dense.empty()) {
      dense = read_dense_at(o.dense);
      dense_ptr = &dense;
    }
  }

  CorpusSplit result;
  std::vector<std::pair<std::size_t, std::size_t>> fallbacks;  // sentence, token
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    MdResult r = hybrid ? md_hybrid(md, lexicon, sentences[i].tokens, ner, dense_ptr)
                        : md_standard(md, lexicon, sentences[i].tokens);
    Sentence out;
    out.tokens = sentences[i].tokens;
    out.morphemes = std::move(r.morphemes);
    result.sentences.push_back(std::move(out));
    for (std::size_t t : r.fallback_tokens) fallbacks.emplace_back(i, t);
  }
  with_output(o.output, [&](std::ostream& out) { write_morpheme_corpus(result, out); });
  if (!o.fallback_report.empty()) {
    with_output(o.fallback_report, [&](std::ostream& out) {
      for (const auto& [sentence, token] : fallbacks)
        out << sentence << '\t' << token << "\tno analysis matched the predicted multi-label length\n";
    });
  }
  json options{{"mode", o.mode}, {"lexicon", o.lexicon}, {"md_model", o.md_model}};
  if (hybrid) options["ner_model"] = o.ner_model;
  std::vector<std::string> inputs = {o.input, o.lexicon, o.md_model};
  if (hybrid) inputs.push_back(o.ner_model);
  write_manifest(o.output, "disambiguate", inputs, options);
}

void run_tag(const TagOpts& o) {
  ChainModel model = with_input(o.model, [](std::istream& in) { return load_model(in); });
  DenseFeatureTable dense;
  const DenseFeatureTable* dense_ptr = nullptr;
  if (!o.dense.empty()) {
    dense = read_dense_at(o.dense);
    dense_ptr = &dense;
  }
  CorpusSplit result;
  if (model.variant == Variant::morpheme) {
    CorpusSplit corpus = read_morpheme_corpus_at(o.input);
    for (Sentence& s : corpus.sentences) {
      s.morpheme_labels = tag_morpheme(model, s.morphemes, dense_ptr);
      result.sentences.push_back(std::move(s));
    }
    with_output(o.output, [&](std::ostream& out) { write_morpheme_corpus(result, out); });
  } else {
    std::vector<Sentence> sentences = read_token_lines_at(o.input);
    for (Sentence& s : sentences) {
      if (model.variant == Variant::token_single) s.token_labels = tag_token_single(model, s, dense_ptr);
      else s.token_multilabels = tag_token_multi(model, s, dense_ptr);
      result.sentences.push_back(std::move(s));
    }
    with_output(o.output, [&](std::ostream& out) { write_token_corpus(result, out); });
  }
  write_manifest(o.output, "tag", {o.model, o.input},
                 json{{"model", o.model}, {"variant", to_string(model.variant)}});
}

double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

double ci95_halfwidth(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double var = 0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= double(xs.size() - 1);
  return 1.96 * std::sqrt(var / double(xs.size()));
}

void run_evaluate(const EvaluateOpts& o) {
  const bool token_level = o.level == "token";
  CorpusSplit gold = token_level ? read_token_corpus_at(o.gold) : read_morpheme_corpus_at(o.gold);
  if (!token_level && !o.gold_tokens.empty()) {
    CorpusSplit tokens = read_token_corpus_at(o.gold_tokens);
    attach_token_forms(gold, tokens);
  }

  // OOTV setup: gold morphology plus the training vocabulary.
  bool with_ootv = !o.ootv_vocab.empty();
  TrainVocab vocab;
  std::vector<Sentence> ootv_gold;
  if (with_ootv) {
    if (!token_level) throw DataError("--ootv-vocab applies to token-level evaluation");
    CorpusSplit vocab_morphs = read_morpheme_corpus_at(o.ootv_vocab);
    if (!o.ootv_vocab_tokens.empty())
      attach_token_forms(vocab_morphs, read_token_corpus_at(o.ootv_vocab_tokens));
    vocab = TrainVocab::from_sentences(vocab_morphs.sentences);
    if (o.gold_morphemes.empty())
      throw DataError("token-level OOTV breakdown requires --gold-morphemes");
    CorpusSplit gm = read_morpheme_corpus_at(o.gold_morphemes);
    if (gm.sentences.size() != gold.sentences.size())
      throw DataError("--gold-morphemes does not parallel the gold corpus");
    for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
      Sentence s = gold.sentences[i];
      s.morphemes = gm.sentences[i].morphemes;
      ootv_gold.push_back(std::move(s));
    }
  }

  std::vector<double> f1s;
  for (const std::string& pred_path : o.preds) {
    FileKind kind = sniff_file_kind(pred_path);
    EvalReport report;
    std::vector<std::vector<Mention>> pred_mentions;  // token-level, for OOTV
    if (kind == FileKind::morpheme) {
      CorpusSplit pred = read_morpheme_corpus_at(pred_path);
      if (pred.sentences.size() != gold.sentences.size())
        throw DataError(pred_path + ": sentence count differs from gold");
      bool labeled = pred.sentences.empty() || !pred.sentences[0].morpheme_labels.empty();
      if (!labeled) {
        // a bare segmentation: report segmentation quality instead of mentions
        if (token_level)
          throw DataError(pred_path + ": unlabeled morpheme predictions need --level morph");
        std::vector<std::vector<Morpheme>> morphemes;
        for (const Sentence& s : pred.sentences) morphemes.push_back(s.morphemes);
        SegPosReport seg = seg_pos_f1(gold.sentences, morphemes);
        print_report(std::cout, "segmentation vs " + pred_path, seg.seg);
        print_report_kv(std::cout, "seg", seg.seg);
        print_report(std::cout, "segmentation+POS vs " + pred_path, seg.seg_pos);
        print_report_kv(std::cout, "segpos", seg.seg_pos);
        f1s.push_back(seg.seg.f1);
        continue;
      }
      std::vector<std::vector<Label>> labels;
      std::vector<std::vector<Morpheme>> morphemes;
      for (const Sentence& s : pred.sentences) {
        if (s.morpheme_labels.size() != s.morphemes.size())
          throw DataError(pred_path + ": predictions lack morpheme labels");
        labels.push_back(s.morpheme_labels);
        morphemes.push_back(s.morphemes);
      }
      if (token_level) {
        report = eval_token_level_morph(gold.sentences, labels, morphemes);
        if (with_ootv) {
          for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
            auto grouped = group_labels_by_token(labels[i], morphemes[i], gold.sentences[i].tokens.size());
            std::vector<Label> collapsed;
            for (const MultiLabel& ml : grouped) collapsed.push_back(extend_to_token_label(ml));
            pred_mentions.push_back(extract_mentions(collapsed, token_forms(gold.sentences[i])));
          }
        }
      } else {
        report = eval_morph_level_morph(gold.sentences, labels, morphemes);
      }
    } else if (kind == FileKind::token_multi) {
      CorpusSplit pred = read_token_corpus_at(pred_path);
      if (pred.sentences.size() != gold.sentences.size())
        throw DataError(pred_path + ": sentence count differs from gold");
      std::vector<std::vector<MultiLabel>> mls;
      for (const Sentence& s : pred.sentences) mls.push_back(s.token_multilabels);
      if (token_level) {
        report = eval_token_level_multi(gold.sentences, mls);
        if (with_ootv) {
          for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
            std::vector<Label> collapsed;
            for (const MultiLabel& ml : mls[i]) collapsed.push_back(extend_to_token_label(ml));
            pred_mentions.push_back(extract_mentions(collapsed, token_forms(gold.sentences[i])));
          }
        }
      } else {
        if (o.morphemes.empty())
          throw CLI::ValidationError(
              "evaluate", "morph-level evaluation of a token-multi prediction needs --morphemes");
        CorpusSplit seg = read_morpheme_corpus_at(o.morphemes);
        std::vector<std::vector<Morpheme>> morphemes;
        for (const Sentence& s : seg.sentences) morphemes.push_back(s.morphemes);
        report = eval_morph_level_multi(gold.sentences, mls, morphemes);
      }
    } else {
      CorpusSplit pred = read_token_corpus_at(pred_path);
      if (pred.sentences.size() != gold.sentences.size())
        throw DataError(pred_path + ": sentence count differs from gold");
      std::vector<std::vector<Label>> labels;
      for (const Sentence& s : pred.sentences) labels.push_back(s.token_labels);
      if (token_level) {
        report = eval_token_level_single(gold.sentences, labels);
        if (with_ootv) {
          for (std::size_t i = 0; i < gold.sentences.size(); ++i)
            pred_mentions.push_back(extract_mentions(labels[i], token_forms(gold.sentences[i])));
        }
      } else {
        report = eval_morph_level_single(gold.sentences, labels);
      }
    }

    print_report(std::cout, o.level + "-level vs " + pred_path, report);
    print_report_kv(std::cout, o.level, report);
    f1s.push_back(report.f1);

    if (with_ootv && !pred_mentions.empty()) {
      auto groups = ootv_breakdown(ootv_gold, pred_mentions, vocab);
      for (const auto& [cat, group_report] : groups) {
        print_report(std::cout, "OOTV " + to_string(cat) + " vs " + pred_path, group_report);
        print_report_kv(std::cout, "ootv." + to_string(cat), group_report);
      }
    }
  }
  if (f1s.size() > 1) {
    std::cout << "== aggregate over " << f1s.size() << " prediction files\n";
    print_kv(std::cout, o.level + ".f1_mean", "ALL", mean_of(f1s));
    print_kv(std::cout, o.level + ".f1_ci95", "ALL", ci95_halfwidth(f1s));
  }
}

void run_ootv(const OotvOpts& o) {
  CorpusSplit corpus = read_morpheme_corpus_at(o.corpus);
  if (!o.tokens.empty()) attach_token_forms(corpus, read_token_corpus_at(o.tokens));
  CorpusSplit vocab_corpus = read_morpheme_corpus_at(o.vocab);
  if (!o.vocab_tokens.empty()) attach_token_forms(vocab_corpus, read_token_corpus_at(o.vocab_tokens));
  TrainVocab vocab = TrainVocab::from_sentences(vocab_corpus.sentences);
  auto counts = ootv_counts(corpus.sentences, vocab);
  for (const auto& [cat, n] : counts) std::cout << to_string(cat) << '\t' << n << "\n";
}

void run_validate(const ValidateOpts& o) {
  CorpusSplit tokens = read_token_corpus_at(o.tokens);
  CorpusSplit morphs = read_morpheme_corpus_at(o.morphemes);
  ValidationReport report = validate_corpus(tokens, morphs);
  std::cout << "sentences\t" << report.sentences << "\n";
  std::cout << "tokens\t" << report.tokens << "\n";
  std::cout << "morphemes\t" << report.morphemes << "\n";
  for (const auto& [cat, n] : report.token_mentions)
    std::cout << "token_mentions\t" << cat << '\t' << n << "\n";
  for (const auto& [cat, n] : report.morph_mentions)
    std::cout << "morph_mentions\t" << cat << '\t' << n << "\n";
  std::cout << "consistent\t" << (report.consistent() ? "yes" : "no") << "\n";
  for (const auto& [sentence, what] : report.mismatches)
    std::cout << "mismatch\t" << sentence << '\t' << what << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphologically aware named-entity tagging over lattices"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.require_subcommand(1);

  AnalyzeOpts analyze_opts;
  auto* analyze_cmd = app.add_subcommand("analyze", "expand tokens into a morphological lattice");
  analyze_cmd->add_option("--input", analyze_opts.input, "token file, one form per line ('-' for stdin)")
      ->required();
  analyze_cmd->add_option("--lexicon", analyze_opts.lexicon, "lexicon file")->required();
  analyze_cmd->add_option("--output", analyze_opts.output, "lattice file ('-' for stdout)");
  analyze_cmd->callback([&] { run_analyze(analyze_opts); });

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a tagging or disambiguation model");
  train_cmd->add_option("--corpus", train_opts.corpus, "training corpus")->required();
  train_cmd->add_option("--variant", train_opts.variant, "model variant")
      ->required()
      ->check(CLI::IsMember({"token-single", "token-multi", "morpheme", "md"}));
  train_cmd->add_option("--output", train_opts.output, "model file")->required();
  train_cmd->add_option("--mode", train_opts.mode, "training mode")
      ->check(CLI::IsMember({"perceptron", "crf-sgd"}));
  train_cmd->add_option("--epochs", train_opts.epochs, "training epochs");
  train_cmd->add_option("--learning-rate", train_opts.learning_rate, "crf-sgd learning rate");
  train_cmd->add_option("--l2", train_opts.l2, "crf-sgd L2 strength");
  train_cmd->add_option("--seed", train_opts.seed, "shuffle seed");
  train_cmd->add_flag("--no-average", train_opts.no_average, "disable weight averaging");
  train_cmd->add_option("--char-ngrams", train_opts.char_ngrams,
                        "max character n-gram length feature (0 = off)");
  train_cmd->add_option("--lexicon", train_opts.lexicon, "lexicon (md variant only)");
  train_cmd->add_option("--dense", train_opts.dense, "dense feature table");
  train_cmd->callback([&] { run_train(train_opts); });

  DisambiguateOpts md_opts;
  auto* md_cmd = app.add_subcommand("disambiguate", "pick one morpheme path per sentence");
  md_cmd->add_option("--input", md_opts.input, "token file, one form per line")->required();
  md_cmd->add_option("--lexicon", md_opts.lexicon, "lexicon file")->required();
  md_cmd->add_option("--md-model", md_opts.md_model, "disambiguation model")->required();
  md_cmd->add_option("--mode", md_opts.mode, "standard or hybrid")
      ->check(CLI::IsMember({"standard", "hybrid"}));
  md_cmd->add_option("--ner-model", md_opts.ner_model, "token-multi model (hybrid mode)");
  md_cmd->add_option("--output", md_opts.output, "morpheme file");
  md_cmd->add_option("--fallback-report", md_opts.fallback_report,
                     "where to list tokens whose pruning fell back");
  md_cmd->add_option("--dense", md_opts.dense, "dense feature table for the NER model");
  md_cmd->callback([&] {
    if (md_opts.mode == "hybrid" && md_opts.ner_model.empty())
      throw CLI::ValidationError("disambiguate", "--mode hybrid requires --ner-model");
    run_disambiguate(md_opts);
  });

  TagOpts tag_opts;
  auto* tag_cmd = app.add_subcommand("tag", "label tokens or morphemes with a trained model");
  tag_cmd->add_option("--model", tag_opts.model, "model file")->required();
  tag_cmd->add_option("--input", tag_opts.input,
                      "token file (token variants) or morpheme file (morpheme variant)")
      ->required();
  tag_cmd->add_option("--output", tag_opts.output, "labeled output file");
  tag_cmd->add_option("--dense", tag_opts.dense, "dense feature table");
  tag_cmd->callback([&] { run_tag(tag_opts); });

  EvaluateOpts eval_opts;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "form-anchored mention F1; prints an aligned table followed by METRIC\\tCATEGORY\\tVALUE lines");
  eval_cmd->add_option("--gold", eval_opts.gold, "gold corpus (token file for --level token, morpheme file for --level morph)")
      ->required();
  eval_cmd->add_option("--pred", eval_opts.preds, "prediction file(s); several give mean and 0.95 CI")
      ->required();
  eval_cmd->add_option("--level", eval_opts.level, "evaluation level")
      ->check(CLI::IsMember({"token", "morph"}));
  eval_cmd->add_option("--morphemes", eval_opts.morphemes,
                       "segmentation file aligning token-multi predictions at morph level");
  eval_cmd->add_option("--gold-tokens", eval_opts.gold_tokens,
                       "parallel token file supplying true token forms for a morph-level gold");
  eval_cmd->add_option("--gold-morphemes", eval_opts.gold_morphemes,
                       "parallel morpheme file supplying gold morphology for the OOTV breakdown");
  eval_cmd->add_option("--ootv-vocab", eval_opts.ootv_vocab, "training morpheme corpus for OOTV grouping");
  eval_cmd->add_option("--ootv-vocab-tokens", eval_opts.ootv_vocab_tokens,
                       "parallel training token corpus for the token vocabulary");
  eval_cmd->callback([&] { run_evaluate(eval_opts); });

  OotvOpts ootv_opts;
  auto* ootv_cmd = app.add_subcommand("ootv", "count gold mentions per OOTV category");
  ootv_cmd->add_option("--corpus", ootv_opts.corpus, "morpheme corpus to categorize")->required();
  ootv_cmd->add_option("--tokens", ootv_opts.tokens, "parallel token file for true token forms");
  ootv_cmd->add_option("--vocab", ootv_opts.vocab, "training morpheme corpus")->required();
  ootv_cmd->add_option("--vocab-tokens", ootv_opts.vocab_tokens, "parallel training token corpus");
  ootv_cmd->callback([&] { run_ootv(ootv_opts); });

  ValidateOpts validate_opts;
  auto* validate_cmd = app.add_subcommand("validate", "check a parallel token/morpheme corpus pair");
  validate_cmd->add_option("--tokens", validate_opts.tokens, "token-level corpus")->required();
  validate_cmd->add_option("--morphemes", validate_opts.morphemes, "morpheme-level corpus")->required();
  validate_cmd->callback([&] { run_validate(validate_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
