#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "morphtag/domain.hpp"
#include "morphtag/lattice.hpp"
#include "morphtag/tagger.hpp"

namespace morphtag {

/// Path scorer for morphological disambiguation: a first-order log-linear
/// model over lattice edges. Emissions are indicator features of each edge
/// (form, POS, form/POS); transitions connect consecutive edges' POS tags,
/// with START/STOP at the sequence ends. POS tags unseen in training
/// contribute zero transition weight.
struct MdModel {
  std::unordered_map<std::string, int> feature_ids;
  std::vector<double> feature_w;
  std::vector<std::string> pos_tags;
  std::unordered_map<std::string, int> pos_ids;
  std::vector<double> transition;  // (P+2)^2 row-major; START=P, STOP=P+1

  int num_pos() const { return int(pos_tags.size()); }
  int start_id() const { return num_pos(); }
  int stop_id() const { return num_pos() + 1; }

  int add_pos(const std::string& pos) {
    auto it = pos_ids.find(pos);
    if (it != pos_ids.end()) return it->second;
    int id = num_pos();
    pos_tags.push_back(pos);
    pos_ids.emplace(pos, id);
    return id;
  }

  int find_pos(const std::string& pos) const {
    auto it = pos_ids.find(pos);
    return it == pos_ids.end() ? -1 : it->second;
  }

  int intern_feature(const std::string& id) {
    auto it = feature_ids.find(id);
    if (it != feature_ids.end()) return it->second;
    int fid = int(feature_w.size());
    feature_ids.emplace(id, fid);
    feature_w.push_back(0.0);
    return fid;
  }

  void finish_pos() { transition.assign(std::size_t(num_pos() + 2) * std::size_t(num_pos() + 2), 0.0); }

  double trans(int from, int to) const {
    if (from < 0 || to < 0) return 0.0;
    return transition[std::size_t(from) * std::size_t(num_pos() + 2) + std::size_t(to)];
  }
  double& trans_ref(int from, int to) {
    return transition[std::size_t(from) * std::size_t(num_pos() + 2) + std::size_t(to)];
  }
};

inline std::vector<std::string> md_edge_features(const Morpheme& m) {
  return {"form=" + m.form, "pos=" + m.pos, "fp=" + m.form + "/" + m.pos};
}

inline double md_edge_score(const MdModel& model, const Morpheme& m) {
  double s = 0;
  for (const std::string& id : md_edge_features(m)) {
    auto it = model.feature_ids.find(id);
    if (it != model.feature_ids.end()) s += model.feature_w[std::size_t(it->second)];
  }
  return s;
}

/// Total score of one full morpheme path: edge emissions plus POS transitions
/// including START before the first edge and STOP after the last.
inline double score_path(const MdModel& model, std::span<const Morpheme> path) {
  if (path.empty()) throw DataError("score_path: empty path");
  double s = 0;
  int prev = model.start_id();
  for (const Morpheme& m : path) {
    s += md_edge_score(model, m);
    int cur = model.find_pos(m.pos);
    s += model.trans(prev, cur);
    prev = cur;
  }
  s += model.trans(prev, model.stop_id());
  return s;
}

/// One disambiguation outcome: the chosen path, the per-token analysis picks,
/// and the tokens where count-pruning had to fall back to the full lattice.
struct MdResult {
  std::vector<Morpheme> morphemes;
  std::vector<std::size_t> analysis_choice;
  std::vector<std::size_t> fallback_tokens;
};

namespace detail {

struct AnalysisScore {
  double internal = 0;  // emissions + POS transitions inside the analysis
  int first_pos = -1;
  int last_pos = -1;
};

inline AnalysisScore score_analysis(const MdModel& model, const Analysis& a) {
  AnalysisScore s;
  int prev = -2;
  for (std::size_t i = 0; i < a.morphemes.size(); ++i) {
    const Morpheme& m = a.morphemes[i];
    s.internal += md_edge_score(model, m);
    int cur = model.find_pos(m.pos);
    if (i == 0) s.first_pos = cur;
    else s.internal += model.trans(prev, cur);
    prev = cur;
  }
  s.last_pos = prev;
  return s;
}

}  // namespace detail

/// Exact argmax path through the lattice by dynamic programming over
/// (token boundary, incoming POS) states. Among equal-scoring paths the
/// lexicographically first by per-token analysis order is returned.
inline MdResult md_decode(const MdModel& model, const SentenceLattice& lattice) {
  if (lattice.tokens.empty()) throw DataError("md_decode: empty lattice");
  const std::size_t n = lattice.tokens.size();

  // Incoming-POS state universe: START plus every analysis-final POS.
  // Unseen POS tags all behave identically (zero transitions), so they share
  // one slot keyed by -1.
  std::vector<int> states;
  auto state_slot = [&](int pos) {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == pos) return i;
    states.push_back(pos);
    return states.size() - 1;
  };
  state_slot(model.start_id());

  std::vector<std::vector<detail::AnalysisScore>> scored(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (const Analysis& a : lattice.tokens[t].analyses) {
      scored[t].push_back(detail::score_analysis(model, a));
      state_slot(scored[t].back().last_pos);
    }
  }

  // suffix[t][slot] = best achievable score of tokens t..n-1 given incoming POS.
  std::vector<std::vector<double>> suffix(n + 1, std::vector<double>(states.size(), 0.0));
  for (std::size_t slot = 0; slot < states.size(); ++slot)
    suffix[n][slot] = model.trans(states[slot], model.stop_id());
  for (std::size_t t = n; t > 0; --t) {
    for (std::size_t slot = 0; slot < states.size(); ++slot) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < scored[t - 1].size(); ++a) {
        const detail::AnalysisScore& s = scored[t - 1][a];
        double v = model.trans(states[slot], s.first_pos) + s.internal +
                   suffix[t][state_slot(s.last_pos)];
        if (v > best) best = v;
      }
      suffix[t - 1][slot] = best;
    }
  }

  // Greedy forward pass: at each token take the first analysis attaining the
  // optimum, which yields the lexicographically smallest argmax path.
  MdResult result;
  result.fallback_tokens = lattice.fallback_tokens;
  std::size_t slot = state_slot(model.start_id());
  for (std::size_t t = 0; t < n; ++t) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t a = 0; a < scored[t].size(); ++a) {
      const detail::AnalysisScore& s = scored[t][a];
      double v = model.trans(states[slot], s.first_pos) + s.internal + suffix[t + 1][state_slot(s.last_pos)];
      if (v > best) {
        best = v;
        arg = a;
      }
    }
    result.analysis_choice.push_back(arg);
    const Analysis& chosen = lattice.tokens[t].analyses[arg];
    result.morphemes.insert(result.morphemes.end(), chosen.morphemes.begin(), chosen.morphemes.end());
    slot = state_slot(scored[t][arg].last_pos);
  }
  return result;
}

/// Standard pipeline: analyze then disambiguate, no NER involvement.
inline MdResult md_standard(const MdModel& model, const Lexicon& lexicon, std::span<const Token> tokens) {
  return md_decode(model, analyze(tokens, lexicon));
}

/// Hybrid pipeline with externally supplied multi-labels (oracle experiments
/// or precomputed NER output): the multi-label lengths prune the lattice
/// before disambiguation.
inline MdResult md_hybrid_with_labels(const MdModel& model, const Lexicon& lexicon,
                                      std::span<const Token> tokens,
                                      std::span<const MultiLabel> multilabels) {
  SentenceLattice pruned = prune(analyze(tokens, lexicon), multilabels);
  return md_decode(model, pruned);
}

/// Hybrid pipeline: token-multi NER runs first and its predicted multi-label
/// lengths prune the lattice; disambiguation then searches only the surviving
/// analyses. Tokens whose predicted length matched nothing are flagged.
inline MdResult md_hybrid(const MdModel& model, const Lexicon& lexicon, std::span<const Token> tokens,
                          const ChainModel& ner_token_multi, const DenseFeatureTable* dense = nullptr) {
  require_variant(ner_token_multi, Variant::token_multi, "md_hybrid");
  Sentence s;
  s.tokens.assign(tokens.begin(), tokens.end());
  std::vector<MultiLabel> multilabels = tag_token_multi(ner_token_multi, s, dense);
  return md_hybrid_with_labels(model, lexicon, tokens, multilabels);
}

/// Trains the path scorer by averaged perceptron over lattice decoding against
/// gold segmentations. Gold analyses missing from the lexicon's lattice are
/// injected so the gold path is always reachable during training.
inline MdModel train_md(std::span<const Sentence> sentences, const Lexicon& lexicon,
                        const TrainConfig& config, TrainStats* stats = nullptr) {
  config.validate();
  struct Instance {
    SentenceLattice lattice;
    std::vector<Morpheme> gold;
  };
  std::vector<Instance> data;
  MdModel model;
  for (const Sentence& s : sentences) {
    if (s.tokens.empty() || s.morphemes.empty()) continue;
    Instance inst;
    inst.lattice = analyze(s.tokens, lexicon);
    auto gold_groups = group_morphemes_by_token(s);
    for (std::size_t t = 0; t < gold_groups.size(); ++t) {
      Analysis gold_a{gold_groups[t]};
      std::string key = analysis_key(gold_a);
      bool present = false;
      for (const Analysis& a : inst.lattice.tokens[t].analyses) {
        if (analysis_key(a) == key) {
          present = true;
          break;
        }
      }
      if (!present) inst.lattice.tokens[t].analyses.push_back(gold_a);
    }
    inst.gold = s.morphemes;
    for (const Morpheme& m : inst.gold) {
      model.add_pos(m.pos);
      for (const std::string& f : md_edge_features(m)) model.intern_feature(f);
    }
    for (const TokenLattice& tl : inst.lattice.tokens) {
      for (const Analysis& a : tl.analyses) {
        for (const Morpheme& m : a.morphemes) {
          model.add_pos(m.pos);
          for (const std::string& f : md_edge_features(m)) model.intern_feature(f);
        }
      }
    }
    data.push_back(std::move(inst));
  }
  if (data.empty()) throw DataError("md training corpus is empty");
  model.finish_pos();

  std::vector<double> feature_acc(model.feature_w.size(), 0.0);
  std::vector<double> transition_acc(model.transition.size(), 0.0);
  double step = 1.0;
  auto bump_feature = [&](int fid, double delta) {
    model.feature_w[std::size_t(fid)] += delta;
    feature_acc[std::size_t(fid)] += step * delta;
  };
  auto bump_trans = [&](int from, int to, double delta) {
    if (from < 0 || to < 0) return;
    std::size_t i = std::size_t(from) * std::size_t(model.num_pos() + 2) + std::size_t(to);
    model.transition[i] += delta;
    transition_acc[i] += step * delta;
  };
  auto update_path = [&](std::span<const Morpheme> path, double sign) {
    int prev = model.start_id();
    for (const Morpheme& m : path) {
      for (const std::string& f : md_edge_features(m)) bump_feature(model.feature_ids.at(f), sign);
      int cur = model.find_pos(m.pos);
      bump_trans(prev, cur, sign);
      prev = cur;
    }
    bump_trans(prev, model.stop_id(), sign);
  };
  auto same_path = [](std::span<const Morpheme> a, std::span<const Morpheme> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].form != b[i].form || a[i].pos != b[i].pos || a[i].token_index != b[i].token_index)
        return false;
    return true;
  };

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    detail::deterministic_shuffle(order, rng);
    double mistakes = 0;
    for (std::size_t idx : order) {
      MdResult pred = md_decode(model, data[idx].lattice);
      if (!same_path(pred.morphemes, data[idx].gold)) {
        mistakes += 1;
        update_path(data[idx].gold, +1.0);
        update_path(pred.morphemes, -1.0);
      }
      step += 1.0;
    }
    if (stats) stats->epoch_objective.push_back(mistakes);
  }
  if (config.average && step > 1.0) {
    for (std::size_t i = 0; i < model.feature_w.size(); ++i) model.feature_w[i] -= feature_acc[i] / step;
    for (std::size_t i = 0; i < model.transition.size(); ++i) model.transition[i] -= transition_acc[i] / step;
  }
  return model;
}

inline void save_md_model(const MdModel& model, std::ostream& out) {
  out << "morphtag-model " << kModelFormatVersion << "\n";
  out << "kind md\n";
  out << "pos " << model.pos_tags.size() << "\n";
  for (const std::string& p : model.pos_tags) out << p << "\n";
  out << "transitions\n";
  const int W = model.num_pos() + 2;
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
  for (const auto& [name, fid] : feats)
    out << name << '\t' << detail::format_weight(model.feature_w[std::size_t(fid)]) << "\n";
  out << "end\n";
}

inline MdModel load_md_model(std::istream& in) {
  {
    auto parts = detail::split_ws(detail::expect_line(in, "header"));
    if (parts.size() != 2 || parts[0] != "morphtag-model") throw ParseError("not a morphtag model file");
    if (parts[1] != std::to_string(kModelFormatVersion))
      throw ParseError("unsupported model format version " + parts[1]);
  }
  {
    auto parts = detail::split_ws(detail::expect_line(in, "kind"));
    if (parts.size() != 2 || parts[0] != "kind" || parts[1] != "md")
      throw ParseError("model file is not an md model");
  }
  MdModel model;
  {
    auto parts = detail::split_ws(detail::expect_line(in, "pos"));
    if (parts.size() != 2 || parts[0] != "pos") throw ParseError("model file: bad pos line");
    std::size_t count = std::stoul(parts[1]);
    for (std::size_t i = 0; i < count; ++i) model.add_pos(detail::expect_line(in, "pos tag"));
  }
  model.finish_pos();
  {
    if (detail::expect_line(in, "transitions") != "transitions")
      throw ParseError("model file: expected transitions section");
    const int W = model.num_pos() + 2;
    for (int i = 0; i < W; ++i) {
      auto parts = detail::split_ws(detail::expect_line(in, "transition row"));
      if (int(parts.size()) != W) throw ParseError("model file: bad transition row");
      for (int j = 0; j < W; ++j)
        model.transition[std::size_t(i) * std::size_t(W) + std::size_t(j)] =
            detail::parse_weight(parts[std::size_t(j)]);
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
      model.feature_w[std::size_t(fid)] = detail::parse_weight(fl.substr(tab + 1));
    }
  }
  if (detail::expect_line(in, "end") != "end") throw ParseError("model file: missing end marker");
  return model;
}

}  // namespace morphtag
