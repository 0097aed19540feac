#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "morphtag/domain.hpp"

namespace morphtag {

inline constexpr const char* kUnknownPos = "UNK";

/// One candidate decomposition of a single token.
struct Analysis {
  std::vector<Morpheme> morphemes;  // slots 0..n-1, all sharing one token_index

  bool operator==(const Analysis&) const = default;
};

/// A deduplicated key for an analysis: its (form, POS) sequence.
inline std::string analysis_key(const Analysis& a) {
  std::string key;
  for (const Morpheme& m : a.morphemes) {
    key += m.form;
    key += '\x1f';
    key += m.pos;
    key += '\x1e';
  }
  return key;
}

/// All candidate analyses of one token.
struct TokenLattice {
  std::size_t token_index = 0;
  std::vector<Analysis> analyses;  // nonempty, no duplicate (form, POS) sequences
};

/// Per-sentence lattice, factored per token: every source-to-sink path picks
/// exactly one analysis per token, so the path count is the product of the
/// per-token analysis counts.
struct SentenceLattice {
  std::vector<TokenLattice> tokens;
  // Tokens where pruning matched no analysis and the full set was restored.
  std::vector<std::size_t> fallback_tokens;

  /// Number of full paths, saturating at uint64 max.
  std::uint64_t path_count() const {
    std::uint64_t n = tokens.empty() ? 0 : 1;
    for (const TokenLattice& t : tokens) {
      std::uint64_t a = t.analyses.size();
      if (a != 0 && n > std::numeric_limits<std::uint64_t>::max() / a)
        return std::numeric_limits<std::uint64_t>::max();
      n *= a;
    }
    return n;
  }
};

struct MorphTemplate {
  std::string form;
  std::string pos;

  bool operator==(const MorphTemplate&) const = default;
};

/// An analysis before it is bound to a token position.
using AnalysisTemplate = std::vector<MorphTemplate>;

/// A splittable clitic prefix (preposition, article, conjunction...).
struct PrefixRule {
  std::string form;
  std::string pos;
};

/// Surface-form to analyses map plus ordered prefix-peeling rules.
/// Decompositions are data: the concatenated morpheme forms need not equal the
/// surface (le+ha+bayit for "labayit" is a legal stored entry).
class Lexicon {
 public:
  void add_entry(const std::string& surface, AnalysisTemplate analysis) {
    auto& list = entries_[surface];
    for (const AnalysisTemplate& a : list) {
      if (a == analysis) return;  // duplicate lines merge with dedup
    }
    list.push_back(std::move(analysis));
  }

  void add_prefix(std::string form, std::string pos) {
    prefixes_.push_back(PrefixRule{std::move(form), std::move(pos)});
  }

  const std::vector<AnalysisTemplate>* lookup(const std::string& surface) const {
    auto it = entries_.find(surface);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::span<const PrefixRule> prefixes() const { return prefixes_; }
  const std::unordered_map<std::string, std::vector<AnalysisTemplate>>& entries() const {
    return entries_;
  }
  bool empty() const { return entries_.empty() && prefixes_.empty(); }

 private:
  std::unordered_map<std::string, std::vector<AnalysisTemplate>> entries_;
  std::vector<PrefixRule> prefixes_;
};

namespace detail {

// Analyses obtainable by peeling one or more listed prefixes off the surface,
// with the final remainder taken from the lexicon.
inline void peel_prefixes(const Lexicon& lexicon, const std::string& surface,
                          std::vector<AnalysisTemplate>& out) {
  for (const PrefixRule& rule : lexicon.prefixes()) {
    if (surface.size() <= rule.form.size()) continue;
    if (surface.compare(0, rule.form.size(), rule.form) != 0) continue;
    std::string rest = surface.substr(rule.form.size());
    std::vector<AnalysisTemplate> rest_analyses;
    if (const auto* direct = lexicon.lookup(rest)) {
      rest_analyses.insert(rest_analyses.end(), direct->begin(), direct->end());
    }
    peel_prefixes(lexicon, rest, rest_analyses);
    for (const AnalysisTemplate& tail : rest_analyses) {
      AnalysisTemplate full;
      full.reserve(tail.size() + 1);
      full.push_back(MorphTemplate{rule.form, rule.pos});
      full.insert(full.end(), tail.begin(), tail.end());
      out.push_back(std::move(full));
    }
  }
}

inline Analysis bind_analysis(const AnalysisTemplate& tmpl, std::size_t token_index) {
  Analysis a;
  a.morphemes.reserve(tmpl.size());
  for (std::size_t slot = 0; slot < tmpl.size(); ++slot) {
    a.morphemes.push_back(Morpheme{tmpl[slot].form, tmpl[slot].pos, token_index, slot});
  }
  return a;
}

}  // namespace detail

/// Morphological analysis: every candidate decomposition of each token.
/// Analyses come from direct lexicon entries plus prefix peeling; a token
/// nothing matched gets the single-morpheme fallback [form/UNK], so no token
/// lattice is ever empty.
inline SentenceLattice analyze(std::span<const Token> tokens, const Lexicon& lexicon) {
  if (tokens.empty()) throw DataError("analyze: empty token sequence");
  SentenceLattice lattice;
  lattice.tokens.reserve(tokens.size());
  for (const Token& token : tokens) {
    TokenLattice tl;
    tl.token_index = token.index;
    std::vector<AnalysisTemplate> candidates;
    if (const auto* direct = lexicon.lookup(token.form)) {
      candidates.insert(candidates.end(), direct->begin(), direct->end());
    }
    detail::peel_prefixes(lexicon, token.form, candidates);
    std::unordered_set<std::string> seen;
    for (const AnalysisTemplate& tmpl : candidates) {
      Analysis a = detail::bind_analysis(tmpl, token.index);
      if (seen.insert(analysis_key(a)).second) tl.analyses.push_back(std::move(a));
    }
    if (tl.analyses.empty()) {
      tl.analyses.push_back(detail::bind_analysis({MorphTemplate{token.form, kUnknownPos}}, token.index));
    }
    lattice.tokens.push_back(std::move(tl));
  }
  return lattice;
}

/// Enumerates full lattice paths in lexicographic-by-analysis-order (the last
/// token's analysis index varies fastest), truncated at cap.
inline std::vector<std::vector<Morpheme>> enumerate_paths(const SentenceLattice& lattice,
                                                          std::size_t cap) {
  if (cap < 1) throw DataError("enumerate_paths: cap must be >= 1");
  std::vector<std::vector<Morpheme>> paths;
  if (lattice.tokens.empty()) return paths;
  std::vector<std::size_t> choice(lattice.tokens.size(), 0);
  while (paths.size() < cap) {
    std::vector<Morpheme> path;
    for (std::size_t t = 0; t < lattice.tokens.size(); ++t) {
      const Analysis& a = lattice.tokens[t].analyses[choice[t]];
      path.insert(path.end(), a.morphemes.begin(), a.morphemes.end());
    }
    paths.push_back(std::move(path));
    // odometer step, rightmost fastest
    std::size_t t = lattice.tokens.size();
    while (t > 0) {
      --t;
      if (++choice[t] < lattice.tokens[t].analyses.size()) break;
      choice[t] = 0;
      if (t == 0) return paths;
    }
  }
  return paths;
}

/// NER-constrained pruning: keeps, per token, only analyses whose morpheme
/// count equals that token's multi-label length. A token left with nothing
/// gets its full analysis set back and is flagged in fallback_tokens.
inline SentenceLattice prune(const SentenceLattice& lattice,
                             std::span<const MultiLabel> multilabels) {
  if (multilabels.size() != lattice.tokens.size())
    throw DataError("prune: " + std::to_string(multilabels.size()) + " multi-labels for " +
                    std::to_string(lattice.tokens.size()) + " tokens");
  SentenceLattice out;
  out.tokens.reserve(lattice.tokens.size());
  for (std::size_t t = 0; t < lattice.tokens.size(); ++t) {
    const TokenLattice& tl = lattice.tokens[t];
    TokenLattice kept;
    kept.token_index = tl.token_index;
    for (const Analysis& a : tl.analyses) {
      if (a.morphemes.size() == multilabels[t].size()) kept.analyses.push_back(a);
    }
    if (kept.analyses.empty()) {
      kept.analyses = tl.analyses;
      out.fallback_tokens.push_back(t);
    }
    out.tokens.push_back(std::move(kept));
  }
  return out;
}

}  // namespace morphtag
