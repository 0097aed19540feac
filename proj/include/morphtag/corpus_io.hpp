#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "morphtag/dense_features.hpp"
#include "morphtag/domain.hpp"
#include "morphtag/eval.hpp"
#include "morphtag/labeling.hpp"
#include "morphtag/lattice.hpp"

namespace morphtag {

/// One corpus split (train/dev/test) with its parsed sentences.
struct CorpusSplit {
  std::string name;
  std::vector<Sentence> sentences;
  bool multi_labeled = false;  // token file carried ^-joined multi-labels
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

[[noreturn]] inline void line_error(const std::string& what, std::size_t line_no, const std::string& line) {
  throw ParseError(what + " at line " + std::to_string(line_no) + ": \"" + line + "\"");
}

}  // namespace detail

// --- token corpus: FORM<TAB>LABEL, blank line between sentences ---------------

/// Reads FORM<TAB>LABEL lines. Any '^' in the file marks the whole corpus as
/// token-multi; caretless labels in such a file are singleton multi-labels
/// (a one-morpheme token's multi-label prints without a separator, so a
/// token-multi corpus is not recognizable line by line).
inline CorpusSplit read_token_corpus(std::istream& in, std::string name = "") {
  CorpusSplit split;
  split.name = std::move(name);
  Sentence cur;
  bool saw_multi = false;
  std::size_t line_no = 0;
  std::string raw;
  auto flush = [&] {
    if (!cur.tokens.empty()) split.sentences.push_back(std::move(cur));
    cur = Sentence{};
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::strip_cr(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    auto fields = detail::split_tabs(line);
    if (fields.size() != 2) detail::line_error("expected FORM<TAB>LABEL", line_no, line);
    if (fields[0].empty()) detail::line_error("empty token form", line_no, line);
    cur.tokens.push_back(Token{fields[0], cur.tokens.size()});
    try {
      saw_multi = saw_multi || fields[1].find('^') != std::string::npos;
      cur.token_multilabels.push_back(parse_multilabel(fields[1]));
    } catch (const ParseError& e) {
      detail::line_error(e.what(), line_no, line);
    }
  }
  flush();
  split.multi_labeled = saw_multi;
  if (!saw_multi) {
    for (Sentence& s : split.sentences) {
      for (const MultiLabel& ml : s.token_multilabels) s.token_labels.push_back(ml[0]);
      s.token_multilabels.clear();
    }
  }
  return split;
}

/// Unlabeled token input: one form per line, blank line between sentences.
inline std::vector<Sentence> read_token_lines(std::istream& in) {
  std::vector<Sentence> out;
  Sentence cur;
  std::size_t line_no = 0;
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::strip_cr(raw);
    if (line.empty()) {
      if (!cur.tokens.empty()) out.push_back(std::move(cur));
      cur = Sentence{};
      continue;
    }
    if (line.find('\t') != std::string::npos || line.find(' ') != std::string::npos)
      detail::line_error("expected a bare token form", line_no, line);
    cur.tokens.push_back(Token{line, cur.tokens.size()});
  }
  if (!cur.tokens.empty()) out.push_back(std::move(cur));
  return out;
}

inline void write_token_corpus(const CorpusSplit& split, std::ostream& out) {
  for (const Sentence& s : split.sentences) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t].form << '\t';
      if (!s.token_multilabels.empty()) out << format_multilabel(s.token_multilabels[t]);
      else if (!s.token_labels.empty()) out << format_label(s.token_labels[t]);
      else throw DataError("write_token_corpus: sentence has no token labels");
      out << '\n';
    }
    out << '\n';
  }
}

// --- morpheme corpus: FORM<TAB>LABEL<TAB>POS<TAB>TOKEN_ID ----------------------

/// Reads a morpheme-level corpus. TOKEN_ID is 1-based and non-decreasing with
/// no gaps. The label column may be "_" throughout for unlabeled data; POS may
/// be "_" in NER-only data. Token forms are placeholder concatenations until a
/// parallel token file is attached (concatenation is not assumed to recover
/// the real surface form).
inline CorpusSplit read_morpheme_corpus(std::istream& in, std::string name = "") {
  CorpusSplit split;
  split.name = std::move(name);
  Sentence cur;
  std::vector<Label> cur_labels;
  bool cur_labeled = false;
  int file_labeled = -1;  // -1 unknown, 0 unlabeled, 1 labeled
  std::size_t line_no = 0;
  std::string raw;
  auto flush = [&] {
    if (!cur.morphemes.empty()) {
      std::size_t token_count = cur.morphemes.back().token_index + 1;
      cur.tokens.reserve(token_count);
      for (std::size_t t = 0; t < token_count; ++t) cur.tokens.push_back(Token{"", t});
      for (const Morpheme& m : cur.morphemes) cur.tokens[m.token_index].form += m.form;
      cur.token_forms_known = false;
      if (cur_labeled) cur.morpheme_labels = cur_labels;
      split.sentences.push_back(std::move(cur));
    }
    cur = Sentence{};
    cur_labels.clear();
    cur_labeled = false;
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::strip_cr(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    auto fields = detail::split_tabs(line);
    if (fields.size() != 4) detail::line_error("expected FORM<TAB>LABEL<TAB>POS<TAB>TOKEN_ID", line_no, line);
    if (fields[0].empty()) detail::line_error("empty morpheme form", line_no, line);
    long token_id = 0;
    try {
      token_id = std::stol(fields[3]);
    } catch (...) {
      detail::line_error("bad TOKEN_ID", line_no, line);
    }
    long prev_id = cur.morphemes.empty() ? 0 : long(cur.morphemes.back().token_index) + 1;
    if (token_id < 1 || token_id < prev_id || token_id > prev_id + 1)
      detail::line_error("TOKEN_ID must be 1-based, non-decreasing, without gaps", line_no, line);
    bool labeled = fields[1] != "_";
    if (file_labeled == -1) file_labeled = labeled ? 1 : 0;
    if (file_labeled != (labeled ? 1 : 0))
      detail::line_error("mixed labeled and unlabeled morpheme lines", line_no, line);
    Morpheme m;
    m.form = fields[0];
    m.pos = fields[2] == "_" ? "" : fields[2];
    m.token_index = std::size_t(token_id - 1);
    std::size_t slot = 0;
    for (auto it = cur.morphemes.rbegin(); it != cur.morphemes.rend() && it->token_index == m.token_index; ++it)
      ++slot;
    m.slot = slot;
    cur.morphemes.push_back(std::move(m));
    if (labeled) {
      try {
        cur_labels.push_back(parse_label(fields[1]));
      } catch (const ParseError& e) {
        detail::line_error(e.what(), line_no, line);
      }
      cur_labeled = true;
    }
  }
  flush();
  return split;
}

/// Replaces placeholder token forms with the true surface forms from a
/// parallel token-level split.
inline void attach_token_forms(CorpusSplit& morph, const CorpusSplit& tokens) {
  if (morph.sentences.size() != tokens.sentences.size())
    throw DataError("parallel corpora disagree: " + std::to_string(morph.sentences.size()) + " vs " +
                    std::to_string(tokens.sentences.size()) + " sentences");
  for (std::size_t i = 0; i < morph.sentences.size(); ++i) {
    Sentence& m = morph.sentences[i];
    const Sentence& t = tokens.sentences[i];
    if (m.tokens.size() != t.tokens.size())
      throw DataError("parallel corpora disagree on token count in sentence " + std::to_string(i));
    for (std::size_t k = 0; k < m.tokens.size(); ++k) m.tokens[k].form = t.tokens[k].form;
    m.token_forms_known = true;
  }
}

inline void write_morpheme_corpus(const CorpusSplit& split, std::ostream& out) {
  for (const Sentence& s : split.sentences) {
    for (std::size_t i = 0; i < s.morphemes.size(); ++i) {
      const Morpheme& m = s.morphemes[i];
      out << m.form << '\t'
          << (s.morpheme_labels.empty() ? std::string("_") : format_label(s.morpheme_labels[i])) << '\t'
          << (m.pos.empty() ? std::string("_") : m.pos) << '\t' << (m.token_index + 1) << '\n';
    }
    out << '\n';
  }
}

// --- lexicon: SURFACE<TAB>analysis{;analysis}*, analysis = form/POS{+form/POS}*

namespace detail {

inline MorphTemplate parse_morph_template(const std::string& text, std::size_t line_no,
                                          const std::string& line) {
  auto slash = text.rfind('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 >= text.size())
    line_error("expected form/POS", line_no, line);
  return MorphTemplate{text.substr(0, slash), text.substr(slash + 1)};
}

}  // namespace detail

inline Lexicon read_lexicon(std::istream& in) {
  Lexicon lex;
  std::size_t line_no = 0;
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::strip_cr(raw);
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() != 2) detail::line_error("expected SURFACE<TAB>analyses", line_no, line);
    if (fields[0] == "@prefix") {
      MorphTemplate t = detail::parse_morph_template(fields[1], line_no, line);
      lex.add_prefix(t.form, t.pos);
      continue;
    }
    std::stringstream analyses(fields[1]);
    std::string one;
    while (std::getline(analyses, one, ';')) {
      if (one.empty()) detail::line_error("empty analysis", line_no, line);
      AnalysisTemplate tmpl;
      std::stringstream parts(one);
      std::string part;
      while (std::getline(parts, part, '+')) {
        tmpl.push_back(detail::parse_morph_template(part, line_no, line));
      }
      lex.add_entry(fields[0], std::move(tmpl));
    }
  }
  return lex;
}

inline void write_lexicon(const Lexicon& lex, std::ostream& out) {
  for (const PrefixRule& p : lex.prefixes()) out << "@prefix\t" << p.form << '/' << p.pos << '\n';
  std::vector<std::string> surfaces;
  for (const auto& [surface, analyses] : lex.entries()) surfaces.push_back(surface);
  std::sort(surfaces.begin(), surfaces.end());
  for (const std::string& surface : surfaces) {
    out << surface << '\t';
    const auto& analyses = *lex.lookup(surface);
    for (std::size_t a = 0; a < analyses.size(); ++a) {
      if (a) out << ';';
      for (std::size_t m = 0; m < analyses[a].size(); ++m) {
        if (m) out << '+';
        out << analyses[a][m].form << '/' << analyses[a][m].pos;
      }
    }
    out << '\n';
  }
}

// --- lattice file: FROM TO FORM POS TOKEN_ID edges, blank line per sentence ----

inline void write_lattices(std::span<const SentenceLattice> lattices, std::ostream& out) {
  for (const SentenceLattice& lattice : lattices) {
    std::size_t next_node = 1;
    std::size_t boundary = 0;
    for (const TokenLattice& tl : lattice.tokens) {
      std::vector<std::vector<std::size_t>> inner(tl.analyses.size());
      for (std::size_t a = 0; a < tl.analyses.size(); ++a) {
        for (std::size_t i = 0; i + 1 < tl.analyses[a].morphemes.size(); ++i)
          inner[a].push_back(next_node++);
      }
      std::size_t end_boundary = next_node++;
      for (std::size_t a = 0; a < tl.analyses.size(); ++a) {
        const std::vector<Morpheme>& ms = tl.analyses[a].morphemes;
        for (std::size_t i = 0; i < ms.size(); ++i) {
          std::size_t from = i == 0 ? boundary : inner[a][i - 1];
          std::size_t to = i + 1 == ms.size() ? end_boundary : inner[a][i];
          out << from << '\t' << to << '\t' << ms[i].form << '\t'
              << (ms[i].pos.empty() ? std::string("_") : ms[i].pos) << '\t' << (tl.token_index + 1)
              << '\n';
        }
      }
      boundary = end_boundary;
    }
    out << '\n';
  }
}

namespace detail {

struct LatticeEdge {
  std::size_t from, to;
  std::string form, pos;
};

inline void paths_from(const std::map<std::size_t, std::vector<LatticeEdge>>& adjacency,
                       std::size_t node, std::size_t sink, std::vector<Morpheme>& stack,
                       std::size_t token_index, TokenLattice& out) {
  if (node == sink) {
    if (stack.empty()) return;
    Analysis a;
    a.morphemes = stack;
    out.analyses.push_back(std::move(a));
    return;
  }
  auto it = adjacency.find(node);
  if (it == adjacency.end()) throw ParseError("lattice: dead-end node " + std::to_string(node));
  if (stack.size() > 64) throw ParseError("lattice: token path too long (cycle?)");
  for (const LatticeEdge& e : it->second) {
    stack.push_back(Morpheme{e.form, e.pos, token_index, stack.size()});
    paths_from(adjacency, e.to, sink, stack, token_index, out);
    stack.pop_back();
  }
}

inline SentenceLattice lattice_from_edges(const std::map<long, std::vector<LatticeEdge>>& by_token,
                                          std::size_t sentence_no) {
  SentenceLattice lattice;
  long expected = 1;
  for (const auto& [tid, edges] : by_token) {
    if (tid != expected)
      throw ParseError("lattice sentence " + std::to_string(sentence_no) + ": token ids not contiguous");
    ++expected;
    std::map<std::size_t, std::vector<LatticeEdge>> adjacency;
    std::map<std::size_t, std::size_t> incoming;
    for (const LatticeEdge& e : edges) {
      adjacency[e.from].push_back(e);
      incoming[e.to] += 1;
      if (!incoming.count(e.from)) incoming[e.from] += 0;
    }
    std::size_t source = std::size_t(-1), sink = std::size_t(-1);
    for (const auto& [node, count] : incoming) {
      if (count == 0) {
        if (source != std::size_t(-1))
          throw ParseError("lattice sentence " + std::to_string(sentence_no) + ": multiple source nodes");
        source = node;
      }
      if (!adjacency.count(node)) {
        if (sink != std::size_t(-1))
          throw ParseError("lattice sentence " + std::to_string(sentence_no) + ": multiple sink nodes");
        sink = node;
      }
    }
    if (source == std::size_t(-1) || sink == std::size_t(-1))
      throw ParseError("lattice sentence " + std::to_string(sentence_no) + ": no source/sink");
    TokenLattice tl;
    tl.token_index = std::size_t(tid - 1);
    std::vector<Morpheme> stack;
    paths_from(adjacency, source, sink, stack, tl.token_index, tl);
    // dedup identical (form, POS) sequences
    std::vector<Analysis> unique;
    std::unordered_set<std::string> seen;
    for (Analysis& a : tl.analyses) {
      if (seen.insert(analysis_key(a)).second) unique.push_back(std::move(a));
    }
    tl.analyses = std::move(unique);
    if (tl.analyses.empty())
      throw ParseError("lattice sentence " + std::to_string(sentence_no) + ": token with no analyses");
    lattice.tokens.push_back(std::move(tl));
  }
  return lattice;
}

}  // namespace detail

inline std::vector<SentenceLattice> read_lattices(std::istream& in) {
  std::vector<SentenceLattice> out;
  std::map<long, std::vector<detail::LatticeEdge>> by_token;
  std::size_t line_no = 0;
  std::string raw;
  auto flush = [&] {
    if (!by_token.empty()) out.push_back(detail::lattice_from_edges(by_token, out.size()));
    by_token.clear();
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::strip_cr(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    auto fields = detail::split_tabs(line);
    if (fields.size() != 5) detail::line_error("expected FROM<TAB>TO<TAB>FORM<TAB>POS<TAB>TOKEN_ID", line_no, line);
    detail::LatticeEdge e;
    long tid = 0;
    try {
      e.from = std::stoul(fields[0]);
      e.to = std::stoul(fields[1]);
      tid = std::stol(fields[4]);
    } catch (...) {
      detail::line_error("bad lattice edge numbers", line_no, line);
    }
    e.form = fields[2];
    e.pos = fields[3] == "_" ? "" : fields[3];
    if (tid < 1) detail::line_error("TOKEN_ID must be 1-based", line_no, line);
    by_token[tid].push_back(std::move(e));
  }
  flush();
  return out;
}

// --- dense feature table: "count dim" header, then "FORM v1 .. vd" rows --------

inline DenseFeatureTable read_dense_features(std::istream& in) {
  DenseFeatureTable table;
  std::string raw;
  if (!std::getline(in, raw)) throw ParseError("dense features: missing header");
  std::istringstream header(detail::strip_cr(raw));
  std::size_t count = 0;
  if (!(header >> count >> table.dim)) throw ParseError("dense features: bad header");
  std::size_t line_no = 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, raw)) throw ParseError("dense features: expected " + std::to_string(count) + " rows");
    ++line_no;
    std::string line = detail::strip_cr(raw);
    std::istringstream is(line);
    std::string form;
    if (!(is >> form)) detail::line_error("dense features: empty row", line_no, line);
    std::vector<double> values;
    double v;
    while (is >> v) values.push_back(v);
    if (values.size() != table.dim)
      detail::line_error("dense features: expected " + std::to_string(table.dim) + " values, got " +
                             std::to_string(values.size()),
                         line_no, line);
    table.vectors[form] = std::move(values);
  }
  return table;
}

// --- parallel-corpus validation ------------------------------------------------

/// Corpus statistics plus the parallel-consistency check: collapsing each
/// token's gold morpheme labels must reproduce the token-level gold.
struct ValidationReport {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t morphemes = 0;
  std::map<std::string, std::size_t> token_mentions;  // per category
  std::map<std::string, std::size_t> morph_mentions;
  std::vector<std::pair<std::size_t, std::string>> mismatches;  // sentence index, what

  bool consistent() const { return mismatches.empty(); }
};

inline ValidationReport validate_corpus(const CorpusSplit& token_split, const CorpusSplit& morph_split) {
  if (token_split.sentences.size() != morph_split.sentences.size())
    throw DataError("sentence count mismatch: " + std::to_string(token_split.sentences.size()) +
                    " token-level vs " + std::to_string(morph_split.sentences.size()) + " morpheme-level");
  ValidationReport report;
  report.sentences = token_split.sentences.size();
  for (std::size_t i = 0; i < token_split.sentences.size(); ++i) {
    const Sentence& ts = token_split.sentences[i];
    const Sentence& ms = morph_split.sentences[i];
    report.tokens += ts.tokens.size();
    report.morphemes += ms.morphemes.size();
    for (const Mention& m : gold_token_mentions(ts)) ++report.token_mentions[m.category];
    for (const Mention& m : gold_morph_mentions(ms)) ++report.morph_mentions[m.category];
    if (ts.tokens.size() != ms.tokens.size()) {
      report.mismatches.emplace_back(i, "token count differs: " + std::to_string(ts.tokens.size()) +
                                            " vs " + std::to_string(ms.tokens.size()));
      continue;
    }
    std::vector<MultiLabel> gold_mls = gold_multilabels(ms);
    for (std::size_t t = 0; t < ts.tokens.size(); ++t) {
      if (!ts.token_multilabels.empty()) {
        if (ts.token_multilabels[t] != gold_mls[t]) {
          report.mismatches.emplace_back(
              i, "token " + std::to_string(t) + ": multi-label " +
                     format_multilabel(ts.token_multilabels[t]) + " vs morphemes " +
                     format_multilabel(gold_mls[t]));
        }
      } else {
        Label collapsed = extend_to_token_label(gold_mls[t]);
        if (!(collapsed == ts.token_labels[t])) {
          report.mismatches.emplace_back(i, "token " + std::to_string(t) + ": morpheme labels collapse to " +
                                                format_label(collapsed) + " but token gold is " +
                                                format_label(ts.token_labels[t]));
        }
      }
    }
  }
  return report;
}

// --- path helpers ---------------------------------------------------------------

inline std::ifstream open_input_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

inline std::ofstream open_output_file(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

}  // namespace morphtag
