#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "morphtag/dense_features.hpp"
#include "morphtag/domain.hpp"
#include "morphtag/labeling.hpp"

namespace morphtag {

/// The three labeling granularities.
enum class Variant { token_single, token_multi, morpheme };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::token_single: return "token-single";
    case Variant::token_multi: return "token-multi";
    case Variant::morpheme: return "morpheme";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "token-single") return Variant::token_single;
  if (s == "token-multi") return Variant::token_multi;
  if (s == "morpheme") return Variant::morpheme;
  throw ParseError("unknown variant: \"" + std::string(s) + "\"");
}

/// Which indicator templates the emission scorer expands.
struct FeatureTemplates {
  bool unit_form = true;
  bool lower_form = true;
  int affix_max = 4;       // prefixes/suffixes of lengths 1..affix_max
  int window = 2;          // neighbor forms at +-1..+-window
  bool shape = true;       // character-class run shape
  int char_ngram_max = 0;  // character n-grams of lengths 2..max, 0 disables
  bool dense = false;      // attach dense vectors from an external table

  bool operator==(const FeatureTemplates&) const = default;
};

/// Sparse indicator features plus an optional externally supplied dense block.
struct FeatureVector {
  std::vector<std::string> ids;
  const std::vector<double>* dense = nullptr;
};

namespace detail {

inline char shape_class(unsigned char c) {
  if (c >= 'a' && c <= 'z') return 'a';
  if (c >= 'A' && c <= 'Z') return 'A';
  if (c >= '0' && c <= '9') return '9';
  return '#';
}

// Run-collapsed character-class shape: "Abc12" -> "Aa9".
inline std::string shape_of(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    char k = shape_class(c);
    if (out.empty() || out.back() != k) out += k;
  }
  return out;
}

inline std::string lowercased(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

/// Expands the configured templates for one position of a unit sequence.
/// Out-of-range window slots yield boundary markers, so the first unit always
/// carries begin-of-sequence context features.
inline FeatureVector featurize(std::span<const std::string> units, std::size_t position,
                               const FeatureTemplates& config,
                               const DenseFeatureTable* dense = nullptr) {
  if (position >= units.size()) throw DataError("featurize: position out of range");
  const std::string& form = units[position];
  FeatureVector fv;
  if (config.unit_form) fv.ids.push_back("w0=" + form);
  if (config.lower_form) fv.ids.push_back("lw0=" + detail::lowercased(form));
  for (int n = 1; n <= config.affix_max && std::size_t(n) <= form.size(); ++n) {
    fv.ids.push_back("p" + std::to_string(n) + "=" + form.substr(0, std::size_t(n)));
    fv.ids.push_back("s" + std::to_string(n) + "=" + form.substr(form.size() - std::size_t(n)));
  }
  for (int d = -config.window; d <= config.window; ++d) {
    if (d == 0) continue;
    long j = long(position) + d;
    std::string neighbor = j < 0 ? "<s>" : (std::size_t(j) >= units.size() ? "</s>" : units[std::size_t(j)]);
    fv.ids.push_back("w" + std::to_string(d) + "=" + neighbor);
  }
  if (config.shape) fv.ids.push_back("sh=" + detail::shape_of(form));
  for (int n = 2; n <= config.char_ngram_max; ++n) {
    if (form.size() < std::size_t(n)) break;
    for (std::size_t i = 0; i + std::size_t(n) <= form.size(); ++i) {
      fv.ids.push_back("cg" + std::to_string(n) + "=" + form.substr(i, std::size_t(n)));
    }
  }
  if (config.dense) {
    fv.dense = dense ? dense->lookup(form) : nullptr;
    if (!fv.dense) fv.ids.push_back("noemb");
  }
  return fv;
}

/// Linear-chain scorer shared by all variants: per-label emission weights over
/// interned indicator features, a transition matrix with START/STOP rows, and
/// optional dense-block weights. The label vocabulary holds single labels for
/// token-single/morpheme models and whole multi-label strings for token-multi.
struct ChainModel {
  Variant variant = Variant::token_single;
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> label_ids;
  std::unordered_map<std::string, int> feature_ids;
  std::vector<std::vector<double>> emission;  // [feature][label]
  std::vector<double> transition;             // (L+2)^2 row-major, incl. START/STOP
  std::vector<std::vector<double>> dense_w;   // [label][dense_dim]
  std::size_t dense_dim = 0;
  FeatureTemplates templates;

  int num_labels() const { return int(labels.size()); }
  int start_id() const { return num_labels(); }
  int stop_id() const { return num_labels() + 1; }

  double trans(int from, int to) const {
    return transition[std::size_t(from) * std::size_t(num_labels() + 2) + std::size_t(to)];
  }
  double& trans(int from, int to) {
    return transition[std::size_t(from) * std::size_t(num_labels() + 2) + std::size_t(to)];
  }

  int add_label(const std::string& label) {
    auto it = label_ids.find(label);
    if (it != label_ids.end()) return it->second;
    int id = num_labels();
    labels.push_back(label);
    label_ids.emplace(label, id);
    return id;
  }

  int intern_feature(const std::string& id) {
    auto it = feature_ids.find(id);
    if (it != feature_ids.end()) return it->second;
    int fid = int(emission.size());
    feature_ids.emplace(id, fid);
    emission.emplace_back(labels.size(), 0.0);
    return fid;
  }

  int find_feature(const std::string& id) const {
    auto it = feature_ids.find(id);
    return it == feature_ids.end() ? -1 : it->second;
  }

  void finish_labels() { transition.assign(std::size_t(num_labels() + 2) * std::size_t(num_labels() + 2), 0.0); }
};

/// A unit sequence after feature expansion and interning.
struct FeaturizedSequence {
  std::vector<std::vector<int>> feats;               // per position, interned ids
  std::vector<const std::vector<double>*> dense;     // per position, may be nullptr
};

inline FeaturizedSequence featurize_units(const ChainModel& model, std::span<const std::string> units,
                                          const DenseFeatureTable* dense = nullptr) {
  FeaturizedSequence out;
  out.feats.resize(units.size());
  out.dense.resize(units.size(), nullptr);
  for (std::size_t t = 0; t < units.size(); ++t) {
    FeatureVector fv = featurize(units, t, model.templates, dense);
    for (const std::string& id : fv.ids) {
      int fid = model.find_feature(id);
      if (fid >= 0) out.feats[t].push_back(fid);
    }
    out.dense[t] = fv.dense;
  }
  return out;
}

inline FeaturizedSequence featurize_and_intern(ChainModel& model, std::span<const std::string> units,
                                               const DenseFeatureTable* dense = nullptr) {
  FeaturizedSequence out;
  out.feats.resize(units.size());
  out.dense.resize(units.size(), nullptr);
  for (std::size_t t = 0; t < units.size(); ++t) {
    FeatureVector fv = featurize(units, t, model.templates, dense);
    for (const std::string& id : fv.ids) out.feats[t].push_back(model.intern_feature(id));
    out.dense[t] = fv.dense;
  }
  return out;
}

/// Emission scores for every (position, label).
inline std::vector<std::vector<double>> emission_scores(const ChainModel& model,
                                                        const FeaturizedSequence& seq) {
  const int L = model.num_labels();
  std::vector<std::vector<double>> emit(seq.feats.size(), std::vector<double>(std::size_t(L), 0.0));
  for (std::size_t t = 0; t < seq.feats.size(); ++t) {
    for (int fid : seq.feats[t]) {
      const std::vector<double>& row = model.emission[std::size_t(fid)];
      for (int l = 0; l < L; ++l) emit[t][std::size_t(l)] += row[std::size_t(l)];
    }
    if (seq.dense[t] && !model.dense_w.empty()) {
      const std::vector<double>& d = *seq.dense[t];
      for (int l = 0; l < L; ++l) {
        double s = 0;
        const std::vector<double>& w = model.dense_w[std::size_t(l)];
        for (std::size_t k = 0; k < w.size() && k < d.size(); ++k) s += w[k] * d[k];
        emit[t][std::size_t(l)] += s;
      }
    }
  }
  return emit;
}

inline double score_sequence(const ChainModel& model, const std::vector<std::vector<double>>& emit,
                             std::span<const int> y) {
  double s = model.trans(model.start_id(), y[0]);
  for (std::size_t t = 0; t < y.size(); ++t) {
    s += emit[t][std::size_t(y[t])];
    if (t + 1 < y.size()) s += model.trans(y[t], y[t + 1]);
  }
  s += model.trans(y[y.size() - 1], model.stop_id());
  return s;
}

/// Max-scoring label sequence. Ties resolve to the lower label index at the
/// latest differing position (strict-improvement updates, labels scanned in
/// vocabulary order).
inline std::vector<int> viterbi_ids(const ChainModel& model, const std::vector<std::vector<double>>& emit) {
  const std::size_t n = emit.size();
  if (n == 0) throw DataError("viterbi: empty input");
  const int L = model.num_labels();
  if (L == 0) throw DataError("viterbi: model has no labels");
  std::vector<double> prev(std::size_t(L), 0.0), cur(std::size_t(L), 0.0);
  std::vector<std::vector<int>> back(n, std::vector<int>(std::size_t(L), -1));
  for (int y = 0; y < L; ++y) prev[std::size_t(y)] = model.trans(model.start_id(), y) + emit[0][std::size_t(y)];
  for (std::size_t t = 1; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = -1;
      for (int yp = 0; yp < L; ++yp) {
        double s = prev[std::size_t(yp)] + model.trans(yp, y);
        if (s > best) {
          best = s;
          arg = yp;
        }
      }
      cur[std::size_t(y)] = best + emit[t][std::size_t(y)];
      back[t][std::size_t(y)] = arg;
    }
    std::swap(prev, cur);
  }
  double best = -std::numeric_limits<double>::infinity();
  int arg = -1;
  for (int y = 0; y < L; ++y) {
    double s = prev[std::size_t(y)] + model.trans(y, model.stop_id());
    if (s > best) {
      best = s;
      arg = y;
    }
  }
  std::vector<int> out(n);
  out[n - 1] = arg;
  for (std::size_t t = n - 1; t > 0; --t) out[t - 1] = back[t][std::size_t(out[t])];
  return out;
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// log of the sum over all label sequences of exp(score).
inline double log_partition_scores(const ChainModel& model,
                                   const std::vector<std::vector<double>>& emit) {
  const std::size_t n = emit.size();
  if (n == 0) throw DataError("log_partition: empty input");
  const int L = model.num_labels();
  std::vector<double> prev(std::size_t(L), 0.0), cur(std::size_t(L), 0.0), buf(std::size_t(L), 0.0);
  for (int y = 0; y < L; ++y) prev[std::size_t(y)] = model.trans(model.start_id(), y) + emit[0][std::size_t(y)];
  for (std::size_t t = 1; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      for (int yp = 0; yp < L; ++yp) buf[std::size_t(yp)] = prev[std::size_t(yp)] + model.trans(yp, y);
      cur[std::size_t(y)] = log_sum_exp(buf) + emit[t][std::size_t(y)];
    }
    std::swap(prev, cur);
  }
  for (int y = 0; y < L; ++y) buf[std::size_t(y)] = prev[std::size_t(y)] + model.trans(y, model.stop_id());
  return log_sum_exp(buf);
}

inline std::vector<std::string> decode(const ChainModel& model, std::span<const std::string> units,
                                       const DenseFeatureTable* dense = nullptr) {
  FeaturizedSequence seq = featurize_units(model, units, dense);
  std::vector<int> ids = viterbi_ids(model, emission_scores(model, seq));
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(model.labels[std::size_t(id)]);
  return out;
}

inline double viterbi_score(const ChainModel& model, std::span<const std::string> units,
                            const DenseFeatureTable* dense = nullptr) {
  FeaturizedSequence seq = featurize_units(model, units, dense);
  auto emit = emission_scores(model, seq);
  std::vector<int> ids = viterbi_ids(model, emit);
  return score_sequence(model, emit, ids);
}

inline double log_partition(const ChainModel& model, std::span<const std::string> units,
                            const DenseFeatureTable* dense = nullptr) {
  FeaturizedSequence seq = featurize_units(model, units, dense);
  return log_partition_scores(model, emission_scores(model, seq));
}

/// Accumulates d(NLL)/dw for one or more sequences.
struct Gradient {
  std::unordered_map<int, std::vector<double>> emission;  // feature id -> per-label grad
  std::vector<double> transition;
  std::vector<std::vector<double>> dense;
  std::vector<int> touched_features;  // insertion order, for deterministic updates

  void init(const ChainModel& model) {
    emission.clear();
    touched_features.clear();
    transition.assign(model.transition.size(), 0.0);
    dense.assign(model.dense_w.size(), std::vector<double>(model.dense_dim, 0.0));
  }

  std::vector<double>& emission_row(int fid, int num_labels) {
    auto it = emission.find(fid);
    if (it == emission.end()) {
      touched_features.push_back(fid);
      it = emission.emplace(fid, std::vector<double>(std::size_t(num_labels), 0.0)).first;
    }
    return it->second;
  }
};

/// Negative log-likelihood of the gold sequence plus its gradient
/// (forward-backward marginals minus empirical counts).
inline double nll_and_gradient(const ChainModel& model, const FeaturizedSequence& seq,
                               std::span<const int> gold, Gradient& grad) {
  const std::size_t n = seq.feats.size();
  const int L = model.num_labels();
  const int W = L + 2;
  auto emit = emission_scores(model, seq);

  std::vector<std::vector<double>> alpha(n, std::vector<double>(std::size_t(L)));
  std::vector<std::vector<double>> beta(n, std::vector<double>(std::size_t(L)));
  std::vector<double> buf(std::size_t(L), 0.0);
  for (int y = 0; y < L; ++y) alpha[0][std::size_t(y)] = model.trans(model.start_id(), y) + emit[0][std::size_t(y)];
  for (std::size_t t = 1; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      for (int yp = 0; yp < L; ++yp) buf[std::size_t(yp)] = alpha[t - 1][std::size_t(yp)] + model.trans(yp, y);
      alpha[t][std::size_t(y)] = log_sum_exp(buf) + emit[t][std::size_t(y)];
    }
  }
  for (int y = 0; y < L; ++y) beta[n - 1][std::size_t(y)] = model.trans(y, model.stop_id());
  for (std::size_t t = n - 1; t > 0; --t) {
    for (int y = 0; y < L; ++y) {
      for (int yn = 0; yn < L; ++yn)
        buf[std::size_t(yn)] = model.trans(y, yn) + emit[t][std::size_t(yn)] + beta[t][std::size_t(yn)];
      beta[t - 1][std::size_t(y)] = log_sum_exp(buf);
    }
  }
  for (int y = 0; y < L; ++y) buf[std::size_t(y)] = alpha[n - 1][std::size_t(y)] + beta[n - 1][std::size_t(y)];
  const double log_z = log_sum_exp(buf);

  // Unary marginals: expected minus empirical feature counts.
  for (std::size_t t = 0; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      double m = std::exp(alpha[t][std::size_t(y)] + beta[t][std::size_t(y)] - log_z);
      double delta = m - (gold[t] == y ? 1.0 : 0.0);
      if (delta == 0.0) continue;
      for (int fid : seq.feats[t]) grad.emission_row(fid, L)[std::size_t(y)] += delta;
      if (seq.dense[t] && !grad.dense.empty()) {
        const std::vector<double>& d = *seq.dense[t];
        for (std::size_t k = 0; k < grad.dense[std::size_t(y)].size() && k < d.size(); ++k)
          grad.dense[std::size_t(y)][k] += delta * d[k];
      }
    }
  }
  // Pairwise marginals for transitions.
  for (int y = 0; y < L; ++y) {
    double m0 = std::exp(alpha[0][std::size_t(y)] + beta[0][std::size_t(y)] - log_z);
    grad.transition[std::size_t(model.start_id()) * std::size_t(W) + std::size_t(y)] +=
        m0 - (gold[0] == y ? 1.0 : 0.0);
    double mn = std::exp(alpha[n - 1][std::size_t(y)] + beta[n - 1][std::size_t(y)] - log_z);
    grad.transition[std::size_t(y) * std::size_t(W) + std::size_t(model.stop_id())] +=
        mn - (gold[n - 1] == y ? 1.0 : 0.0);
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    for (int y = 0; y < L; ++y) {
      for (int yn = 0; yn < L; ++yn) {
        double m = std::exp(alpha[t][std::size_t(y)] + model.trans(y, yn) + emit[t + 1][std::size_t(yn)] +
                            beta[t + 1][std::size_t(yn)] - log_z);
        double empirical = (gold[t] == y && gold[t + 1] == yn) ? 1.0 : 0.0;
        grad.transition[std::size_t(y) * std::size_t(W) + std::size_t(yn)] += m - empirical;
      }
    }
  }
  return log_z - score_sequence(model, emit, gold);
}

enum class TrainMode { averaged_perceptron, crf_sgd };

inline std::string to_string(TrainMode m) {
  return m == TrainMode::averaged_perceptron ? "perceptron" : "crf-sgd";
}

inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "perceptron") return TrainMode::averaged_perceptron;
  if (s == "crf-sgd") return TrainMode::crf_sgd;
  throw ParseError("unknown training mode: \"" + std::string(s) + "\"");
}

struct TrainConfig {
  TrainMode mode = TrainMode::averaged_perceptron;
  int epochs = 20;
  double learning_rate = 0.01;
  double l2 = 1e-4;
  double lr_decay = 0.05;
  int batch_size = 8;
  std::uint64_t seed = 1;
  bool average = true;
  FeatureTemplates templates;

  /// Library defaults; the gradient trainer uses the tuned per-variant rates
  /// (0.005 for token-multi, 0.01 otherwise) over 200 epochs with batches of 8.
  static TrainConfig defaults_for(Variant variant, TrainMode mode = TrainMode::averaged_perceptron) {
    TrainConfig c;
    c.mode = mode;
    if (mode == TrainMode::crf_sgd) {
      c.epochs = 200;
      c.batch_size = 8;
      c.learning_rate = variant == Variant::token_multi ? 0.005 : 0.01;
      c.lr_decay = 0.05;
    }
    return c;
  }

  void validate() const {
    if (epochs < 1) throw DataError("train config: epochs must be >= 1");
    if (learning_rate <= 0) throw DataError("train config: learning rate must be > 0");
  }
};

/// Per-epoch training objective: mistaken units for the perceptron,
/// total NLL for the gradient trainer.
struct TrainStats {
  std::vector<double> epoch_objective;
};

struct TrainSequence {
  std::vector<std::string> units;
  std::vector<std::string> labels;
};

/// Extracts (units, gold label strings) pairs for a variant. Single labels and
/// multi-labels are derived from whichever gold layers the sentences carry.
inline std::vector<TrainSequence> prepare_training(std::span<const Sentence> sentences, Variant variant) {
  std::vector<TrainSequence> out;
  for (const Sentence& s : sentences) {
    if (s.tokens.empty()) continue;
    TrainSequence seq;
    switch (variant) {
      case Variant::token_single: {
        seq.units = token_forms(s);
        std::vector<Label> labels = s.token_labels;
        if (labels.empty() && !s.token_multilabels.empty()) {
          for (const MultiLabel& ml : s.token_multilabels) labels.push_back(extend_to_token_label(ml));
        }
        if (labels.empty() && !s.morpheme_labels.empty()) {
          for (const MultiLabel& ml : gold_multilabels(s)) labels.push_back(extend_to_token_label(ml));
        }
        if (labels.size() != s.tokens.size())
          throw DataError("token-single training requires token-level labels");
        for (const Label& l : labels) seq.labels.push_back(format_label(l));
        break;
      }
      case Variant::token_multi: {
        seq.units = token_forms(s);
        std::vector<MultiLabel> mls = s.token_multilabels;
        if (mls.empty() && !s.morpheme_labels.empty()) mls = gold_multilabels(s);
        if (mls.size() != s.tokens.size())
          throw DataError("token-multi training requires multi-labels or gold morphology");
        for (const MultiLabel& ml : mls) seq.labels.push_back(format_multilabel(ml));
        break;
      }
      case Variant::morpheme: {
        if (s.morpheme_labels.size() != s.morphemes.size() || s.morphemes.empty())
          throw DataError("morpheme training requires labeled morphemes");
        seq.units = morpheme_forms(s.morphemes);
        for (const Label& l : s.morpheme_labels) seq.labels.push_back(format_label(l));
        break;
      }
    }
    out.push_back(std::move(seq));
  }
  if (out.empty()) throw DataError("training corpus is empty");
  return out;
}

namespace detail {

// Fisher-Yates with raw mt19937_64 draws: bit-reproducible across platforms,
// unlike std::shuffle.
inline void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = std::size_t(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

struct AveragedWeights {
  std::vector<std::vector<double>> emission_acc;
  std::vector<double> transition_acc;
  std::vector<std::vector<double>> dense_acc;

  void grow_to(const ChainModel& model) {
    while (emission_acc.size() < model.emission.size())
      emission_acc.emplace_back(model.labels.size(), 0.0);
    if (transition_acc.size() < model.transition.size()) transition_acc.resize(model.transition.size(), 0.0);
    if (dense_acc.size() < model.dense_w.size())
      dense_acc.resize(model.dense_w.size(), std::vector<double>(model.dense_dim, 0.0));
  }
};

}  // namespace detail

/// Trains a chain model. The averaged perceptron is the reference trainer;
/// crf_sgd minimizes L2-regularized NLL with per-epoch learning-rate decay.
/// Deterministic given the seed: identical runs produce identical weights.
inline ChainModel train(std::span<const Sentence> sentences, Variant variant, const TrainConfig& config,
                        const DenseFeatureTable* dense = nullptr, TrainStats* stats = nullptr) {
  config.validate();
  std::vector<TrainSequence> data = prepare_training(sentences, variant);

  ChainModel model;
  model.variant = variant;
  model.templates = config.templates;
  if (config.templates.dense) {
    if (!dense) throw DataError("dense templates enabled but no dense feature table supplied");
    model.dense_dim = dense->dim;
  }
  for (const TrainSequence& seq : data) {
    for (const std::string& l : seq.labels) model.add_label(l);
  }
  model.finish_labels();
  model.dense_w.assign(model.labels.size(), std::vector<double>(model.dense_dim, 0.0));

  std::vector<FeaturizedSequence> feats;
  std::vector<std::vector<int>> gold;
  feats.reserve(data.size());
  gold.reserve(data.size());
  for (const TrainSequence& seq : data) {
    feats.push_back(featurize_and_intern(model, seq.units, dense));
    std::vector<int> g;
    g.reserve(seq.labels.size());
    for (const std::string& l : seq.labels) g.push_back(model.label_ids.at(l));
    gold.push_back(std::move(g));
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const int L = model.num_labels();
  const int W = L + 2;

  if (config.mode == TrainMode::averaged_perceptron) {
    detail::AveragedWeights acc;
    acc.grow_to(model);
    double step = 1.0;
    auto bump = [&](double& w, double& a, double delta) {
      w += delta;
      a += step * delta;
    };
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      detail::deterministic_shuffle(order, rng);
      double mistakes = 0;
      for (std::size_t idx : order) {
        const FeaturizedSequence& seq = feats[idx];
        const std::vector<int>& y = gold[idx];
        std::vector<int> pred = viterbi_ids(model, emission_scores(model, seq));
        if (pred != y) {
          const std::size_t n = y.size();
          for (std::size_t t = 0; t < n; ++t) {
            if (pred[t] == y[t]) continue;
            mistakes += 1;
            for (int fid : seq.feats[t]) {
              bump(model.emission[std::size_t(fid)][std::size_t(y[t])],
                   acc.emission_acc[std::size_t(fid)][std::size_t(y[t])], 1.0);
              bump(model.emission[std::size_t(fid)][std::size_t(pred[t])],
                   acc.emission_acc[std::size_t(fid)][std::size_t(pred[t])], -1.0);
            }
            if (seq.dense[t] && model.dense_dim > 0) {
              const std::vector<double>& d = *seq.dense[t];
              for (std::size_t k = 0; k < model.dense_dim && k < d.size(); ++k) {
                bump(model.dense_w[std::size_t(y[t])][k], acc.dense_acc[std::size_t(y[t])][k], d[k]);
                bump(model.dense_w[std::size_t(pred[t])][k], acc.dense_acc[std::size_t(pred[t])][k], -d[k]);
              }
            }
          }
          auto trans_bump = [&](int from, int to, double delta) {
            std::size_t i = std::size_t(from) * std::size_t(W) + std::size_t(to);
            bump(model.transition[i], acc.transition_acc[i], delta);
          };
          trans_bump(model.start_id(), y[0], 1.0);
          trans_bump(model.start_id(), pred[0], -1.0);
          for (std::size_t t = 0; t + 1 < n; ++t) {
            trans_bump(y[t], y[t + 1], 1.0);
            trans_bump(pred[t], pred[t + 1], -1.0);
          }
          trans_bump(y[n - 1], model.stop_id(), 1.0);
          trans_bump(pred[n - 1], model.stop_id(), -1.0);
        }
        step += 1.0;
      }
      if (stats) stats->epoch_objective.push_back(mistakes);
    }
    if (config.average && step > 1.0) {
      // w_avg = w - acc/step  (acc holds sum of step-stamped deltas)
      for (std::size_t f = 0; f < model.emission.size(); ++f)
        for (int l = 0; l < L; ++l)
          model.emission[f][std::size_t(l)] -= acc.emission_acc[f][std::size_t(l)] / step;
      for (std::size_t i = 0; i < model.transition.size(); ++i)
        model.transition[i] -= acc.transition_acc[i] / step;
      for (std::size_t l = 0; l < model.dense_w.size(); ++l)
        for (std::size_t k = 0; k < model.dense_dim; ++k)
          model.dense_w[l][k] -= acc.dense_acc[l][k] / step;
    }
  } else {
    Gradient grad;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const double lr = config.learning_rate / (1.0 + config.lr_decay * epoch);
      detail::deterministic_shuffle(order, rng);
      double total_nll = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(config.batch_size)) {
        grad.init(model);
        std::size_t end = std::min(order.size(), begin + std::size_t(config.batch_size));
        for (std::size_t i = begin; i < end; ++i) {
          total_nll += nll_and_gradient(model, feats[order[i]], gold[order[i]], grad);
        }
        for (int fid : grad.touched_features) {
          const std::vector<double>& g = grad.emission.at(fid);
          std::vector<double>& w = model.emission[std::size_t(fid)];
          for (int l = 0; l < L; ++l)
            w[std::size_t(l)] -= lr * (g[std::size_t(l)] + config.l2 * w[std::size_t(l)]);
        }
        for (std::size_t i = 0; i < model.transition.size(); ++i)
          model.transition[i] -= lr * (grad.transition[i] + config.l2 * model.transition[i]);
        for (std::size_t l = 0; l < model.dense_w.size(); ++l)
          for (std::size_t k = 0; k < model.dense_dim; ++k)
            model.dense_w[l][k] -= lr * (grad.dense[l][k] + config.l2 * model.dense_w[l][k]);
      }
      if (stats) stats->epoch_objective.push_back(total_nll);
    }
  }
  return model;
}

inline void require_variant(const ChainModel& model, Variant expected, const char* what) {
  if (model.variant != expected)
    throw DataError(std::string(what) + " requires a " + to_string(expected) + " model, got " +
                    to_string(model.variant));
}

inline std::vector<Label> tag_token_single(const ChainModel& model, const Sentence& s,
                                           const DenseFeatureTable* dense = nullptr) {
  require_variant(model, Variant::token_single, "tag_token_single");
  std::vector<Label> out;
  for (const std::string& l : decode(model, token_forms(s), dense)) out.push_back(parse_label(l));
  return out;
}

inline std::vector<MultiLabel> tag_token_multi(const ChainModel& model, const Sentence& s,
                                               const DenseFeatureTable* dense = nullptr) {
  require_variant(model, Variant::token_multi, "tag_token_multi");
  std::vector<MultiLabel> out;
  for (const std::string& l : decode(model, token_forms(s), dense)) out.push_back(parse_multilabel(l));
  return out;
}

inline std::vector<Label> tag_morpheme(const ChainModel& model, std::span<const Morpheme> morphemes,
                                       const DenseFeatureTable* dense = nullptr) {
  require_variant(model, Variant::morpheme, "tag_morpheme");
  std::vector<Label> out;
  for (const std::string& l : decode(model, morpheme_forms(morphemes), dense)) out.push_back(parse_label(l));
  return out;
}

// ---------------------------------------------------------------------------
// Model serialization: versioned line-based text, deterministic byte-for-byte
// (features sorted lexicographically, %.17g weights).

namespace detail {

inline std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", w);
  return buf;
}

inline double parse_weight(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ParseError("bad weight: \"" + s + "\"");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string("model file: missing ") + what);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

inline void save_model(const ChainModel& model, std::ostream& out) {
  out << "morphtag-model " << kModelFormatVersion << "\n";
  out << "kind tagger\n";
  out << "variant " << to_string(model.variant) << "\n";
  const FeatureTemplates& t = model.templates;
  out << "templates unit_form=" << t.unit_form << " lower_form=" << t.lower_form
      << " affix_max=" << t.affix_max << " window=" << t.window << " shape=" << t.shape
      << " char_ngram_max=" << t.char_ngram_max << " dense=" << t.dense << "\n";
  out << "labels " << model.labels.size() << "\n";
  for (const std::string& l : model.labels) out << l << "\n";
  out << "transitions\n";
  const int W = model.num_labels() + 2;
  for (int i = 0; i < W; ++i) {
    for (int j = 0; j < W; ++j) {
      if (j) out << ' ';
      out << detail::format_weight(model.transition[std::size_t(i) * std::size_t(W) + std::size_t(j)]);
    }
    out << "\n";
  }
  std::vector<std::pair<std::string, int>> feats(model.feature_ids.begin(), model.feature_ids.end());
  std::sort(feats.begin(), feats.end());
  out << "features " << feats.size() << "\n";
  for (const auto& [name, fid] : feats) {
    out << name << '\t';
    const std::vector<double>& row = model.emission[std::size_t(fid)];
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (l) out << ' ';
      out << detail::format_weight(row[l]);
    }
    out << "\n";
  }
  out << "dense_dim " << model.dense_dim << "\n";
  if (model.dense_dim > 0) {
    for (const std::vector<double>& row : model.dense_w) {
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (k) out << ' ';
        out << detail::format_weight(row[k]);
      }
      out << "\n";
    }
  }
  out << "end\n";
}

inline ChainModel load_model(std::istream& in) {
  std::string line = detail::expect_line(in, "header");
  {
    auto parts = detail::split_ws(line);
    if (parts.size() != 2 || parts[0] != "morphtag-model")
      throw ParseError("not a morphtag model file");
    if (parts[1] != std::to_string(kModelFormatVersion))
      throw ParseError("unsupported model format version " + parts[1] + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
  }
  {
    auto parts = detail::split_ws(detail::expect_line(in, "kind"));
    if (parts.size() != 2 || parts[0] != "kind" || parts[1] != "tagger")
      throw ParseError("model file is not a tagger model");
  }
  ChainModel model;
  {
    auto parts = detail::split_ws(detail::expect_line(in, "variant"));
    if (parts.size() != 2 || parts[0] != "variant") throw ParseError("model file: bad variant line");
    model.variant = parse_variant(parts[1]);
  }
  {
    auto parts = detail::split_ws(detail::expect_line(in, "templates"));
    if (parts.empty() || parts[0] != "templates") throw ParseError("model file: bad templates line");
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto eq = parts[i].find('=');
      if (eq == std::string::npos) throw ParseError("model file: bad template item " + parts[i]);
      std::string key = parts[i].substr(0, eq);
      int value = std::stoi(parts[i].substr(eq + 1));
      FeatureTemplates& t = model.templates;
      if (key == "unit_form") t.unit_form = value;
      else if (key == "lower_form") t.lower_form = value;
      else if (key == "affix_max") t.affix_max = value;
      else if (key == "window") t.window = value;
      else if (key == "shape") t.shape = value;
      else if (key == "char_ngram_max") t.char_ngram_max = value;
      else if (key == "dense") t.dense = value;
      else throw ParseError("model file: unknown template key " + key);
    }
  }
  {
    auto parts = detail::split_ws(detail::expect_line(in, "labels"));
    if (parts.size() != 2 || parts[0] != "labels") throw ParseError("model file: bad labels line");
    std::size_t count = std::stoul(parts[1]);
    for (std::size_t i = 0; i < count; ++i) model.add_label(detail::expect_line(in, "label"));
  }
  model.finish_labels();
  {
    if (detail::expect_line(in, "transitions") != "transitions")
      throw ParseError("model file: expected transitions section");
    const int W = model.num_labels() + 2;
    for (int i = 0; i < W; ++i) {
      auto parts = detail::split_ws(detail::expect_line(in, "transition row"));
      if (int(parts.size()) != W) throw ParseError("model file: bad transition row");
      for (int j = 0; j < W; ++j)
        model.transition[std::size_t(i) * std::size_t(W) + std::size_t(j)] = detail::parse_weight(parts[std::size_t(j)]);
    }
  }
  {
    auto parts = detail::split_ws(detail::expect_line(in, "features"));
    if (parts.size() != 2 || parts[0] != "features") throw ParseError("model file: bad features line");
    std::size_t count = std::stoul(parts[1]);
    for (std::size_t i = 0; i < count; ++i) {
      std::string fl = detail::expect_line(in, "feature row");
      auto tab = fl.find('\t');
      if (tab == std::string::npos) throw ParseError("model file: bad feature row");
      int fid = model.intern_feature(fl.substr(0, tab));
      auto weights = detail::split_ws(fl.substr(tab + 1));
      if (weights.size() != model.labels.size()) throw ParseError("model file: bad feature weight count");
      for (std::size_t l = 0; l < weights.size(); ++l)
        model.emission[std::size_t(fid)][l] = detail::parse_weight(weights[l]);
    }
  }
  {
    auto parts = detail::split_ws(detail::expect_line(in, "dense_dim"));
    if (parts.size() != 2 || parts[0] != "dense_dim") throw ParseError("model file: bad dense_dim line");
    model.dense_dim = std::stoul(parts[1]);
    model.dense_w.assign(model.labels.size(), std::vector<double>(model.dense_dim, 0.0));
    if (model.dense_dim > 0) {
      for (std::size_t l = 0; l < model.labels.size(); ++l) {
        auto weights = detail::split_ws(detail::expect_line(in, "dense row"));
        if (weights.size() != model.dense_dim) throw ParseError("model file: bad dense row");
        for (std::size_t k = 0; k < model.dense_dim; ++k)
          model.dense_w[l][k] = detail::parse_weight(weights[k]);
      }
    }
  }
  if (detail::expect_line(in, "end") != "end") throw ParseError("model file: missing end marker");
  return model;
}

}  // namespace morphtag
