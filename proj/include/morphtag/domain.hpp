#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace morphtag {

/// Thrown when textual input (labels, corpus lines, model files) cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when well-formed input violates a data contract (length mismatches etc.).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entity category codes are data, not an enum: corpora define their own sets
/// (PER, ORG, GPE, ...). A valid code is nonempty, uppercase ASCII, no whitespace.
inline bool is_valid_category(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) return false;
  }
  return name[0] >= 'A' && name[0] <= 'Z';
}

/// One BIOSE boundary tag plus an entity category.
/// The category is empty if and only if the boundary is 'O'.
struct Label {
  char boundary = 'O';   // one of O B I S E
  std::string category;  // empty iff boundary == 'O'

  bool operator==(const Label&) const = default;

  bool outside() const { return boundary == 'O'; }
};

/// The ordered labels of one token's morphemes.
using MultiLabel = std::vector<Label>;

/// A surface token as it appears in running text.
struct Token {
  std::string form;
  std::size_t index = 0;  // 0-based position in the sentence

  bool operator==(const Token&) const = default;
};

/// A morphological segment: one edge of a lattice path, owned by a token.
struct Morpheme {
  std::string form;
  std::string pos;              // may be empty in NER-only data
  std::size_t token_index = 0;  // owning token
  std::size_t slot = 0;         // 0-based position among the token's morphemes

  bool operator==(const Morpheme&) const = default;
};

/// A sentence with whatever annotation layers are known. Empty vectors mean
/// "layer absent"; when a layer is present its length matches what it annotates.
struct Sentence {
  std::vector<Token> tokens;
  std::vector<Morpheme> morphemes;        // present when segmentation is known
  std::vector<Label> token_labels;        // token-single gold
  std::vector<MultiLabel> token_multilabels;  // token-multi gold
  std::vector<Label> morpheme_labels;     // morpheme-level gold
  // False when token forms were reconstructed by concatenating morphemes
  // (a morpheme file without a parallel token file): such forms are placeholders
  // and must not be used for token-level evaluation.
  bool token_forms_known = true;

  bool has_morphemes() const { return !morphemes.empty(); }
};

/// An entity occurrence anchored in its surface form, not its position.
/// begin/end record the unit span it was extracted from, for bookkeeping only:
/// equality and hashing use (form, category) alone.
struct Mention {
  std::string form;      // unit forms joined by single ASCII spaces
  std::string category;
  std::size_t begin = 0;  // first unit index
  std::size_t end = 0;    // last unit index, inclusive

  friend bool operator==(const Mention& a, const Mention& b) {
    return a.form == b.form && a.category == b.category;
  }
};

struct MentionHash {
  std::size_t operator()(const Mention& m) const {
    std::size_t h = std::hash<std::string>{}(m.form);
    return h ^ (std::hash<std::string>{}(m.category) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
  }
};

inline bool is_biose_char(char c) {
  return c == 'O' || c == 'B' || c == 'I' || c == 'S' || c == 'E';
}

/// Parses "O" or "<BIES>-<CATEGORY>". "_" is accepted as separator on input;
/// "-" is the canonical one on output.
inline Label parse_label(std::string_view text) {
  if (text == "O") return Label{};
  if (text.size() >= 3 && (text[1] == '-' || text[1] == '_')) {
    char b = text[0];
    if (b == 'B' || b == 'I' || b == 'S' || b == 'E') {
      std::string cat(text.substr(2));
      if (is_valid_category(cat)) return Label{b, std::move(cat)};
    }
  }
  throw ParseError("malformed label: \"" + std::string(text) + "\"");
}

inline std::string format_label(const Label& label) {
  if (label.outside()) return "O";
  std::string out(1, label.boundary);
  out += '-';
  out += label.category;
  return out;
}

/// Multi-label textual form: labels joined by '^', e.g. "O^B-ORG^I-ORG".
inline MultiLabel parse_multilabel(std::string_view text) {
  MultiLabel out;
  std::size_t start = 0;
  while (true) {
    std::size_t caret = text.find('^', start);
    std::string_view part = text.substr(start, caret == std::string_view::npos ? caret : caret - start);
    out.push_back(parse_label(part));
    if (caret == std::string_view::npos) break;
    start = caret + 1;
  }
  return out;
}

inline std::string format_multilabel(const MultiLabel& ml) {
  std::string out;
  for (std::size_t i = 0; i < ml.size(); ++i) {
    if (i) out += '^';
    out += format_label(ml[i]);
  }
  return out;
}

inline std::string join_forms(std::span<const std::string> forms, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i <= end; ++i) {
    if (i > begin) out += ' ';
    out += forms[i];
  }
  return out;
}

/// Extracts mentions from a label sequence over the given unit forms.
/// Well-formed spans (S, or B [I...] E of one category) are consumed first;
/// any other non-O fragment is recovered permissively as the maximal run of
/// non-O labels sharing one category.
inline std::vector<Mention> extract_mentions(std::span<const Label> labels,
                                             std::span<const std::string> forms) {
  if (labels.size() != forms.size())
    throw DataError("extract_mentions: " + std::to_string(labels.size()) + " labels vs " +
                    std::to_string(forms.size()) + " forms");
  std::vector<Mention> out;
  const std::size_t n = labels.size();
  std::size_t i = 0;
  while (i < n) {
    if (labels[i].outside()) {
      ++i;
      continue;
    }
    const std::string& cat = labels[i].category;
    if (labels[i].boundary == 'S') {
      out.push_back(Mention{forms[i], cat, i, i});
      ++i;
      continue;
    }
    if (labels[i].boundary == 'B') {
      std::size_t j = i + 1;
      while (j < n && labels[j].boundary == 'I' && labels[j].category == cat) ++j;
      if (j < n && labels[j].boundary == 'E' && labels[j].category == cat) {
        out.push_back(Mention{join_forms(forms, i, j), cat, i, j});
        i = j + 1;
        continue;
      }
    }
    // Invalid fragment: take the maximal same-category non-O run as one mention.
    std::size_t j = i;
    while (j + 1 < n && !labels[j + 1].outside() && labels[j + 1].category == cat) ++j;
    out.push_back(Mention{join_forms(forms, i, j), cat, i, j});
    i = j + 1;
  }
  return out;
}

/// Inverse of extraction for span-anchored mentions: single-unit spans become S,
/// longer ones B I... E. Spans must be disjoint and inside [0, length).
inline std::vector<Label> mentions_to_labels(std::span<const Mention> mentions, std::size_t length) {
  std::vector<Label> out(length);
  std::vector<bool> used(length, false);
  for (const Mention& m : mentions) {
    if (m.end < m.begin || m.end >= length)
      throw DataError("mention span [" + std::to_string(m.begin) + "," + std::to_string(m.end) +
                      "] out of range for length " + std::to_string(length));
    for (std::size_t i = m.begin; i <= m.end; ++i) {
      if (used[i]) throw DataError("overlapping mention spans at unit " + std::to_string(i));
      used[i] = true;
    }
    if (m.begin == m.end) {
      out[m.begin] = Label{'S', m.category};
    } else {
      out[m.begin] = Label{'B', m.category};
      for (std::size_t i = m.begin + 1; i < m.end; ++i) out[i] = Label{'I', m.category};
      out[m.end] = Label{'E', m.category};
    }
  }
  return out;
}

/// Groups a sentence's morphemes by owning token, in slot order.
/// Every token must own at least one morpheme.
inline std::vector<std::vector<Morpheme>> group_morphemes_by_token(const Sentence& sentence) {
  std::vector<std::vector<Morpheme>> groups(sentence.tokens.size());
  for (const Morpheme& m : sentence.morphemes) {
    if (m.token_index >= groups.size())
      throw DataError("morpheme token_index " + std::to_string(m.token_index) +
                      " out of range for " + std::to_string(groups.size()) + " tokens");
    groups[m.token_index].push_back(m);
  }
  for (std::size_t t = 0; t < groups.size(); ++t) {
    if (groups[t].empty()) throw DataError("token " + std::to_string(t) + " owns no morphemes");
  }
  return groups;
}

inline std::vector<std::string> token_forms(const Sentence& s) {
  std::vector<std::string> out;
  out.reserve(s.tokens.size());
  for (const Token& t : s.tokens) out.push_back(t.form);
  return out;
}

inline std::vector<std::string> morpheme_forms(std::span<const Morpheme> morphemes) {
  std::vector<std::string> out;
  out.reserve(morphemes.size());
  for (const Morpheme& m : morphemes) out.push_back(m.form);
  return out;
}

}  // namespace morphtag
