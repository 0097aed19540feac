#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "morphtag/domain.hpp"

namespace morphtag {

namespace detail {

// Matchers for the six collapse alternatives, tried in this order.
// A full match of alternative k yields the canonical char O B S I E S.
inline bool all_of_char(std::string_view s, char c) {
  for (char x : s)
    if (x != c) return false;
  return !s.empty();
}

// O* B I*
inline bool match_obi(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 'O') ++i;
  if (i >= s.size() || s[i] != 'B') return false;
  for (++i; i < s.size(); ++i)
    if (s[i] != 'I') return false;
  return true;
}

// O* B I* E O*
inline bool match_obie(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 'O') ++i;
  if (i >= s.size() || s[i] != 'B') return false;
  ++i;
  while (i < s.size() && s[i] == 'I') ++i;
  if (i >= s.size() || s[i] != 'E') return false;
  for (++i; i < s.size(); ++i)
    if (s[i] != 'O') return false;
  return true;
}

// I* E O*
inline bool match_ieo(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 'I') ++i;
  if (i >= s.size() || s[i] != 'E') return false;
  for (++i; i < s.size(); ++i)
    if (s[i] != 'O') return false;
  return true;
}

// O* S O*
inline bool match_oso(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 'O') ++i;
  if (i >= s.size() || s[i] != 'S') return false;
  for (++i; i < s.size(); ++i)
    if (s[i] != 'O') return false;
  return true;
}

}  // namespace detail

/// Collapses a per-morpheme boundary string to one BIOSE char.
/// Alternatives O+ | O*BI* | O*BI*EO* | I+ | I*EO* | O*SO* are tried left to
/// right and the first full match wins (yielding O B S I E S respectively).
/// Strings matching none fall back to set semantics: S, or both B and E, give
/// S; otherwise E, then B, then I, then O.
inline char collapse_biose(std::string_view s) {
  if (s.empty()) throw DataError("collapse_biose: empty string");
  for (char c : s) {
    if (!is_biose_char(c)) throw DataError(std::string("collapse_biose: bad char '") + c + "'");
  }
  if (detail::all_of_char(s, 'O')) return 'O';
  if (detail::match_obi(s)) return 'B';
  if (detail::match_obie(s)) return 'S';
  if (detail::all_of_char(s, 'I')) return 'I';
  if (detail::match_ieo(s)) return 'E';
  if (detail::match_oso(s)) return 'S';

  bool has_b = false, has_e = false, has_i = false;
  for (char c : s) {
    if (c == 'S') return 'S';
    has_b |= c == 'B';
    has_e |= c == 'E';
    has_i |= c == 'I';
  }
  if (has_b && has_e) return 'S';
  if (has_e) return 'E';
  if (has_b) return 'B';
  if (has_i) return 'I';
  return 'O';
}

inline std::string boundary_string(const MultiLabel& labels) {
  std::string s;
  s.reserve(labels.size());
  for (const Label& l : labels) s += l.boundary;
  return s;
}

/// Extends a token's multi-label to a single token label: collapsed boundary
/// plus the first non-O category in order.
inline Label extend_to_token_label(const MultiLabel& labels) {
  if (labels.empty()) throw DataError("extend_to_token_label: empty multi-label");
  char b = collapse_biose(boundary_string(labels));
  if (b == 'O') return Label{};
  for (const Label& l : labels) {
    if (!l.outside()) return Label{b, l.category};
  }
  return Label{};  // unreachable for valid labels; all-O collapses to O
}

/// Aligns a token's multi-label with the morpheme forms chosen for it.
/// Pairs are matched from the final one backwards: extra forms are padded with
/// O at the beginning, extra labels are trimmed from the beginning.
inline std::vector<std::pair<std::string, Label>> align_multilabel_to_morphemes(
    const MultiLabel& labels, std::span<const std::string> forms) {
  if (labels.empty() || forms.empty())
    throw DataError("align_multilabel_to_morphemes: empty input");
  std::vector<std::pair<std::string, Label>> out;
  out.reserve(forms.size());
  if (forms.size() >= labels.size()) {
    std::size_t pad = forms.size() - labels.size();
    for (std::size_t i = 0; i < forms.size(); ++i) {
      out.emplace_back(forms[i], i < pad ? Label{} : labels[i - pad]);
    }
  } else {
    std::size_t trim = labels.size() - forms.size();
    for (std::size_t i = 0; i < forms.size(); ++i) {
      out.emplace_back(forms[i], labels[trim + i]);
    }
  }
  return out;
}

/// Per-token multi-labels of a gold morpheme-labeled sentence.
inline std::vector<MultiLabel> gold_multilabels(const Sentence& sentence) {
  if (sentence.morpheme_labels.size() != sentence.morphemes.size())
    throw DataError("gold_multilabels: sentence lacks morpheme labels");
  std::vector<MultiLabel> out(sentence.tokens.size());
  std::vector<std::size_t> seen(sentence.tokens.size(), 0);
  for (std::size_t i = 0; i < sentence.morphemes.size(); ++i) {
    std::size_t t = sentence.morphemes[i].token_index;
    if (t >= out.size()) throw DataError("gold_multilabels: morpheme token_index out of range");
    out[t].push_back(sentence.morpheme_labels[i]);
    ++seen[t];
  }
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t].empty()) throw DataError("gold_multilabels: token " + std::to_string(t) + " owns no morphemes");
  }
  return out;
}

}  // namespace morphtag
