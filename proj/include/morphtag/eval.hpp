#pragma once

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "morphtag/domain.hpp"
#include "morphtag/labeling.hpp"

namespace morphtag {

struct PrfCounts {
  std::size_t gold = 0;
  std::size_t pred = 0;
  std::size_t matched = 0;
};

/// Precision / recall / F1 as percentages. Zero-denominator convention:
/// P (or R) is 0 when there are no predictions (or no gold), F1 is 0 when
/// P + R is 0.
struct EvalReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t gold_total = 0;
  std::size_t pred_total = 0;
  std::size_t matched_total = 0;
  std::map<std::string, PrfCounts> by_category;
};

inline void fill_prf(EvalReport& r) {
  r.precision = r.pred_total == 0 ? 0.0 : 100.0 * double(r.matched_total) / double(r.pred_total);
  r.recall = r.gold_total == 0 ? 0.0 : 100.0 * double(r.matched_total) / double(r.gold_total);
  r.f1 = (r.precision + r.recall) == 0 ? 0.0
                                       : 2.0 * r.precision * r.recall / (r.precision + r.recall);
}

namespace detail {

inline std::string mention_key(const Mention& m) { return m.form + '\x1f' + m.category; }

}  // namespace detail

/// Form-anchored strict mention F1: per sentence, matched mentions are the
/// multiset intersection by (form, category); scores are micro-averaged over
/// the corpus. Positions never matter.
inline EvalReport mention_f1(std::span<const std::vector<Mention>> gold,
                             std::span<const std::vector<Mention>> pred) {
  if (gold.size() != pred.size())
    throw DataError("mention_f1: " + std::to_string(gold.size()) + " gold vs " +
                    std::to_string(pred.size()) + " predicted sentences");
  EvalReport r;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::unordered_map<std::string, std::size_t> gold_counts;
    for (const Mention& m : gold[s]) {
      ++gold_counts[detail::mention_key(m)];
      ++r.by_category[m.category].gold;
      ++r.gold_total;
    }
    for (const Mention& m : pred[s]) {
      ++r.by_category[m.category].pred;
      ++r.pred_total;
      auto it = gold_counts.find(detail::mention_key(m));
      if (it != gold_counts.end() && it->second > 0) {
        --it->second;
        ++r.by_category[m.category].matched;
        ++r.matched_total;
      }
    }
  }
  fill_prf(r);
  return r;
}

/// Inter-annotator agreement: mention F1 treating annotator a as gold and b as
/// the prediction.
inline EvalReport iaa(std::span<const std::vector<Mention>> annotations_a,
                      std::span<const std::vector<Mention>> annotations_b) {
  return mention_f1(annotations_a, annotations_b);
}

// --- gold mention extraction ------------------------------------------------

/// Token-level gold mentions, from token labels (derived from multi-labels or
/// morpheme labels when the single-label layer is absent).
inline std::vector<Mention> gold_token_mentions(const Sentence& s) {
  std::vector<Label> labels = s.token_labels;
  if (labels.empty() && !s.token_multilabels.empty()) {
    for (const MultiLabel& ml : s.token_multilabels) labels.push_back(extend_to_token_label(ml));
  }
  if (labels.empty() && !s.morpheme_labels.empty()) {
    for (const MultiLabel& ml : gold_multilabels(s)) labels.push_back(extend_to_token_label(ml));
  }
  if (labels.size() != s.tokens.size()) throw DataError("sentence has no token-level gold labels");
  return extract_mentions(labels, token_forms(s));
}

/// Morpheme-level gold mentions over the gold segmentation.
inline std::vector<Mention> gold_morph_mentions(const Sentence& s) {
  if (s.morpheme_labels.size() != s.morphemes.size() || s.morphemes.empty())
    throw DataError("sentence has no morpheme-level gold labels");
  return extract_mentions(s.morpheme_labels, morpheme_forms(s.morphemes));
}

/// Groups per-morpheme labels into one multi-label per token.
inline std::vector<MultiLabel> group_labels_by_token(std::span<const Label> labels,
                                                     std::span<const Morpheme> morphemes,
                                                     std::size_t token_count) {
  if (labels.size() != morphemes.size())
    throw DataError("group_labels_by_token: label/morpheme count mismatch");
  std::vector<MultiLabel> out(token_count);
  for (std::size_t i = 0; i < morphemes.size(); ++i) {
    if (morphemes[i].token_index >= token_count)
      throw DataError("group_labels_by_token: token_index out of range");
    out[morphemes[i].token_index].push_back(labels[i]);
  }
  for (std::size_t t = 0; t < token_count; ++t)
    if (out[t].empty()) throw DataError("group_labels_by_token: token without morphemes");
  return out;
}

// --- token-level evaluation ---------------------------------------------------

inline EvalReport eval_token_level_single(std::span<const Sentence> gold,
                                          std::span<const std::vector<Label>> pred) {
  std::vector<std::vector<Mention>> g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    g.push_back(gold_token_mentions(gold[i]));
    p.push_back(extract_mentions(pred[i], token_forms(gold[i])));
  }
  return mention_f1(g, p);
}

inline EvalReport eval_token_level_multi(std::span<const Sentence> gold,
                                         std::span<const std::vector<MultiLabel>> pred) {
  std::vector<std::vector<Mention>> g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<Label> collapsed;
    for (const MultiLabel& ml : pred[i]) collapsed.push_back(extend_to_token_label(ml));
    g.push_back(gold_token_mentions(gold[i]));
    p.push_back(extract_mentions(collapsed, token_forms(gold[i])));
  }
  return mention_f1(g, p);
}

/// Token-level evaluation of a morpheme model: predicted morpheme labels are
/// grouped per owning token, collapsed to one label, then extracted over the
/// token forms.
inline EvalReport eval_token_level_morph(std::span<const Sentence> gold,
                                         std::span<const std::vector<Label>> pred_labels,
                                         std::span<const std::vector<Morpheme>> morphemes_used) {
  std::vector<std::vector<Mention>> g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& s = gold[i];
    if (!s.token_forms_known)
      throw DataError("token-level evaluation requires true token forms (parallel token file)");
    std::vector<MultiLabel> grouped =
        group_labels_by_token(pred_labels[i], morphemes_used[i], s.tokens.size());
    std::vector<Label> collapsed;
    for (const MultiLabel& ml : grouped) collapsed.push_back(extend_to_token_label(ml));
    g.push_back(gold_token_mentions(s));
    p.push_back(extract_mentions(collapsed, token_forms(s)));
  }
  return mention_f1(g, p);
}

// --- morpheme-level evaluation ------------------------------------------------

inline EvalReport eval_morph_level_morph(std::span<const Sentence> gold,
                                         std::span<const std::vector<Label>> pred_labels,
                                         std::span<const std::vector<Morpheme>> morphemes_used) {
  std::vector<std::vector<Mention>> g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    g.push_back(gold_morph_mentions(gold[i]));
    p.push_back(extract_mentions(pred_labels[i], morpheme_forms(morphemes_used[i])));
  }
  return mention_f1(g, p);
}

/// Morpheme-level evaluation of a token-multi model: each token's multi-label
/// is aligned with the morphemes chosen for it (gold, standard or hybrid) and
/// mentions are extracted over those morpheme forms.
inline EvalReport eval_morph_level_multi(std::span<const Sentence> gold,
                                         std::span<const std::vector<MultiLabel>> pred,
                                         std::span<const std::vector<Morpheme>> morphemes_used) {
  std::vector<std::vector<Mention>> g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& s = gold[i];
    std::vector<std::vector<Morpheme>> groups(s.tokens.size());
    for (const Morpheme& m : morphemes_used[i]) {
      if (m.token_index >= groups.size()) throw DataError("morpheme token_index out of range");
      groups[m.token_index].push_back(m);
    }
    if (pred[i].size() != s.tokens.size())
      throw DataError("token-multi prediction count does not match token count");
    std::vector<Label> aligned;
    std::vector<std::string> forms;
    for (std::size_t t = 0; t < groups.size(); ++t) {
      if (groups[t].empty()) throw DataError("token without chosen morphemes");
      std::vector<std::string> tf = morpheme_forms(groups[t]);
      for (auto& [form, label] : align_multilabel_to_morphemes(pred[i][t], tf)) {
        forms.push_back(form);
        aligned.push_back(label);
      }
    }
    g.push_back(gold_morph_mentions(s));
    p.push_back(extract_mentions(aligned, forms));
  }
  return mention_f1(g, p);
}

/// Morpheme-level evaluation of a token-single model: extraction over token
/// forms, compared against the morpheme-level gold. Boundary mismatches fail
/// as form mismatches.
inline EvalReport eval_morph_level_single(std::span<const Sentence> gold,
                                          std::span<const std::vector<Label>> pred) {
  std::vector<std::vector<Mention>> g, p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!gold[i].token_forms_known)
      throw DataError("token-level predictions need true token forms (parallel token file)");
    g.push_back(gold_morph_mentions(gold[i]));
    p.push_back(extract_mentions(pred[i], token_forms(gold[i])));
  }
  return mention_f1(g, p);
}

// --- segmentation metrics ----------------------------------------------------

struct SegPosReport {
  EvalReport seg;      // per-token multiset overlap of morpheme forms
  EvalReport seg_pos;  // same, over (form, POS) pairs
};

/// Segmentation and Seg+POS F1: per token, the multiset overlap between gold
/// and predicted morphemes, micro-averaged over the corpus. Both sides must
/// cover the same token sequence.
inline SegPosReport seg_pos_f1(std::span<const Sentence> gold,
                               std::span<const std::vector<Morpheme>> pred) {
  if (gold.size() != pred.size()) throw DataError("seg_pos_f1: sentence count mismatch");
  SegPosReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& s = gold[i];
    std::vector<std::vector<Morpheme>> gold_groups = group_morphemes_by_token(s);
    std::vector<std::vector<Morpheme>> pred_groups(s.tokens.size());
    for (const Morpheme& m : pred[i]) {
      if (m.token_index >= pred_groups.size())
        throw DataError("seg_pos_f1: predicted token coverage mismatch at sentence " + std::to_string(i));
      pred_groups[m.token_index].push_back(m);
    }
    for (std::size_t t = 0; t < gold_groups.size(); ++t) {
      if (pred_groups[t].empty())
        throw DataError("seg_pos_f1: predicted token coverage mismatch at sentence " + std::to_string(i));
      std::unordered_map<std::string, std::size_t> form_counts, fp_counts;
      for (const Morpheme& m : gold_groups[t]) {
        ++form_counts[m.form];
        ++fp_counts[m.form + '\x1f' + m.pos];
      }
      r.seg.gold_total += gold_groups[t].size();
      r.seg_pos.gold_total += gold_groups[t].size();
      r.seg.pred_total += pred_groups[t].size();
      r.seg_pos.pred_total += pred_groups[t].size();
      for (const Morpheme& m : pred_groups[t]) {
        auto f = form_counts.find(m.form);
        if (f != form_counts.end() && f->second > 0) {
          --f->second;
          ++r.seg.matched_total;
        }
        auto fp = fp_counts.find(m.form + '\x1f' + m.pos);
        if (fp != fp_counts.end() && fp->second > 0) {
          --fp->second;
          ++r.seg_pos.matched_total;
        }
      }
    }
  }
  fill_prf(r.seg);
  fill_prf(r.seg_pos);
  return r;
}

// --- out-of-training-vocabulary analysis --------------------------------------

/// OOTV category of a mention, decided by its hardest unknown token:
/// an unknown single-morpheme token is Lexical, an unknown token of known
/// morphemes is Compositional, an unknown token with an unknown morpheme is
/// LexComp; mentions whose tokens are all known are Known.
enum class OotvCategory { known, lexical, compositional, lexcomp };

inline std::string to_string(OotvCategory c) {
  switch (c) {
    case OotvCategory::known: return "Known";
    case OotvCategory::lexical: return "Lexical";
    case OotvCategory::compositional: return "Compositional";
    case OotvCategory::lexcomp: return "LexComp";
  }
  return "?";
}

/// Surface vocabulary observed in training, at both granularities.
struct TrainVocab {
  std::unordered_set<std::string> tokens;
  std::unordered_set<std::string> morphemes;

  static TrainVocab from_sentences(std::span<const Sentence> sentences) {
    TrainVocab v;
    for (const Sentence& s : sentences) {
      for (const Token& t : s.tokens) v.tokens.insert(t.form);
      for (const Morpheme& m : s.morphemes) v.morphemes.insert(m.form);
    }
    return v;
  }
};

inline OotvCategory ootv_categorize(std::span<const std::string> mention_token_forms,
                                    std::span<const std::vector<std::string>> token_morph_forms,
                                    const TrainVocab& vocab) {
  if (mention_token_forms.size() != token_morph_forms.size() || mention_token_forms.empty())
    throw DataError("ootv_categorize: missing token morphology");
  OotvCategory hardest = OotvCategory::known;
  for (std::size_t t = 0; t < mention_token_forms.size(); ++t) {
    if (vocab.tokens.count(mention_token_forms[t])) continue;
    const std::vector<std::string>& morphs = token_morph_forms[t];
    if (morphs.empty()) throw DataError("ootv_categorize: token without morphemes");
    OotvCategory c;
    if (morphs.size() == 1) {
      c = OotvCategory::lexical;
    } else {
      bool all_known = true;
      for (const std::string& m : morphs) all_known = all_known && vocab.morphemes.count(m) > 0;
      c = all_known ? OotvCategory::compositional : OotvCategory::lexcomp;
    }
    if (int(c) > int(hardest)) hardest = c;
  }
  return hardest;
}

namespace detail {

inline OotvCategory categorize_span(const Sentence& s, const Mention& m,
                                    std::span<const std::vector<Morpheme>> gold_groups,
                                    const TrainVocab& vocab) {
  std::vector<std::string> forms;
  std::vector<std::vector<std::string>> morphs;
  for (std::size_t t = m.begin; t <= m.end && t < s.tokens.size(); ++t) {
    forms.push_back(s.tokens[t].form);
    morphs.push_back(morpheme_forms(gold_groups[t]));
  }
  return ootv_categorize(forms, morphs, vocab);
}

}  // namespace detail

/// Splits token-level evaluation by OOTV category. Gold mentions are grouped
/// by their own category; a matched prediction is credited to the group of the
/// gold mention it matches, an unmatched prediction to the group of its own
/// categorization.
inline std::map<OotvCategory, EvalReport> ootv_breakdown(
    std::span<const Sentence> gold, std::span<const std::vector<Mention>> pred,
    const TrainVocab& vocab) {
  if (gold.size() != pred.size()) throw DataError("ootv_breakdown: sentence count mismatch");
  std::map<OotvCategory, EvalReport> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& s = gold[i];
    std::vector<std::vector<Morpheme>> groups = group_morphemes_by_token(s);
    std::vector<Mention> gold_mentions = gold_token_mentions(s);
    std::vector<OotvCategory> gold_cats;
    std::unordered_map<std::string, std::vector<std::size_t>> open;  // key -> unmatched gold idx
    for (std::size_t g = 0; g < gold_mentions.size(); ++g) {
      OotvCategory c = detail::categorize_span(s, gold_mentions[g], groups, vocab);
      gold_cats.push_back(c);
      EvalReport& r = out[c];
      ++r.gold_total;
      ++r.by_category[gold_mentions[g].category].gold;
      open[detail::mention_key(gold_mentions[g])].push_back(g);
    }
    for (const Mention& p : pred[i]) {
      auto it = open.find(detail::mention_key(p));
      if (it != open.end() && !it->second.empty()) {
        std::size_t g = it->second.front();
        it->second.erase(it->second.begin());
        EvalReport& r = out[gold_cats[g]];
        ++r.pred_total;
        ++r.matched_total;
        ++r.by_category[p.category].pred;
        ++r.by_category[p.category].matched;
      } else {
        OotvCategory c = detail::categorize_span(s, p, groups, vocab);
        EvalReport& r = out[c];
        ++r.pred_total;
        ++r.by_category[p.category].pred;
      }
    }
  }
  for (auto& [cat, report] : out) fill_prf(report);
  return out;
}

/// Gold-mention counts per OOTV category.
inline std::map<OotvCategory, std::size_t> ootv_counts(std::span<const Sentence> gold,
                                                       const TrainVocab& vocab) {
  std::map<OotvCategory, std::size_t> out;
  for (const Sentence& s : gold) {
    std::vector<std::vector<Morpheme>> groups = group_morphemes_by_token(s);
    for (const Mention& m : gold_token_mentions(s)) {
      ++out[detail::categorize_span(s, m, groups, vocab)];
    }
  }
  return out;
}

}  // namespace morphtag
