#pragma once

#include <random>
#include <string>
#include <vector>

#include "morphtag/domain.hpp"

namespace morphtest {

inline std::string golden_dir() {
#ifdef MORPHTAG_GOLDEN_DIR
  return MORPHTAG_GOLDEN_DIR;
#else
  return "data/golden";
#endif
}

inline morphtag::Label L(const std::string& text) { return morphtag::parse_label(text); }

inline morphtag::MultiLabel ML(const std::string& text) { return morphtag::parse_multilabel(text); }

/// The bundled golden sentence with all three annotation layers.
inline morphtag::Sentence golden_sentence() {
  using namespace morphtag;
  Sentence s;
  s.tokens = {Token{"hamerotz", 0}, Token{"labayit", 1}, Token{"halavan", 2}};
  auto add = [&](const char* form, const char* pos, std::size_t tok, std::size_t slot, const char* label) {
    s.morphemes.push_back(Morpheme{form, pos, tok, slot});
    s.morpheme_labels.push_back(parse_label(label));
  };
  add("ha", "DET", 0, 0, "O");
  add("merotz", "NN", 0, 1, "O");
  add("le", "IN", 1, 0, "O");
  add("ha", "DET", 1, 1, "B-ORG");
  add("bayit", "NN", 1, 2, "I-ORG");
  add("ha", "DET", 2, 0, "I-ORG");
  add("lavan", "JJ", 2, 1, "E-ORG");
  s.token_labels = {L("O"), L("B-ORG"), L("E-ORG")};
  s.token_multilabels = {ML("O^O"), ML("O^B-ORG^I-ORG"), ML("I-ORG^E-ORG")};
  return s;
}

/// Random well-formed BIOSE label sequence (disjoint S / B..E spans only).
inline std::vector<morphtag::Label> random_wellformed_labels(std::mt19937_64& rng, std::size_t n) {
  using namespace morphtag;
  static const std::vector<std::string> cats = {"PER", "ORG", "GPE"};
  std::vector<Label> out;
  std::size_t i = 0;
  while (i < n) {
    if (rng() % 2 == 0) {
      out.push_back(Label{});
      ++i;
      continue;
    }
    const std::string& cat = cats[rng() % cats.size()];
    std::size_t len = 1 + rng() % std::min<std::size_t>(4, n - i);
    if (len == 1) {
      out.push_back(Label{'S', cat});
    } else {
      out.push_back(Label{'B', cat});
      for (std::size_t k = 1; k + 1 < len; ++k) out.push_back(Label{'I', cat});
      out.push_back(Label{'E', cat});
    }
    i += len;
  }
  return out;
}

inline std::vector<std::string> numbered_forms(std::size_t n, const std::string& stem = "u") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

}  // namespace morphtest
