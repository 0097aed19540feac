#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "morphtag/eval.hpp"
#include "support/helpers.hpp"

using namespace morphtag;
using morphtest::L;
using morphtest::ML;

namespace {

std::vector<std::vector<Mention>> one_sentence(std::vector<Mention> mentions) {
  return {std::move(mentions)};
}

}  // namespace

TEST_CASE("mention_f1 basics") {
  Mention white_house{"bayit halavan", "ORG", 0, 1};
  EvalReport perfect = mention_f1(one_sentence({white_house}), one_sentence({white_house}));
  CHECK(perfect.precision == 100.0);
  CHECK(perfect.recall == 100.0);
  CHECK(perfect.f1 == 100.0);

  Mention spurious{"hamerotz", "PER", 0, 0};
  EvalReport extra = mention_f1(one_sentence({white_house}), one_sentence({white_house, spurious}));
  CHECK(extra.precision == Catch::Approx(50.0));
  CHECK(extra.recall == Catch::Approx(100.0));
  CHECK(extra.f1 == Catch::Approx(66.67).margin(0.01));
  CHECK(extra.by_category.at("ORG").matched == 1);
  CHECK(extra.by_category.at("PER").pred == 1);

  // token-level form vs morpheme-level form: boundary mismatch, no credit
  Mention token_form{"labayit halavan", "ORG", 1, 2};
  Mention morph_form{"ha bayit ha lavan", "ORG", 3, 6};
  EvalReport mismatch = mention_f1(one_sentence({morph_form}), one_sentence({token_form}));
  CHECK(mismatch.matched_total == 0);
  CHECK(mismatch.f1 == 0.0);
}

TEST_CASE("mention_f1 uses multiset semantics for duplicates") {
  Mention m{"dan", "PER", 0, 0};
  Mention m2{"dan", "PER", 4, 4};
  // two gold occurrences, one predicted: only one credit
  EvalReport r = mention_f1(one_sentence({m, m2}), one_sentence({m}));
  CHECK(r.matched_total == 1);
  CHECK(r.recall == Catch::Approx(50.0));
  // one gold, two predicted: still one credit
  r = mention_f1(one_sentence({m}), one_sentence({m, m2}));
  CHECK(r.matched_total == 1);
  CHECK(r.precision == Catch::Approx(50.0));
}

TEST_CASE("mention_f1 is permutation-invariant within a sentence") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Mention> gold, pred;
    for (int i = 0; i < 6; ++i) {
      std::string form = "m" + std::to_string(int(rng() % 4));
      std::string cat = rng() % 2 ? "PER" : "ORG";
      if (rng() % 2) gold.push_back(Mention{form, cat, std::size_t(i), std::size_t(i)});
      if (rng() % 2) pred.push_back(Mention{form, cat, std::size_t(i), std::size_t(i)});
    }
    EvalReport base = mention_f1(one_sentence(gold), one_sentence(pred));
    std::shuffle(pred.begin(), pred.end(), rng);
    std::shuffle(gold.begin(), gold.end(), rng);
    EvalReport shuffled = mention_f1(one_sentence(gold), one_sentence(pred));
    CHECK(base.matched_total == shuffled.matched_total);
    CHECK(base.f1 == shuffled.f1);
  }
}

TEST_CASE("iaa scores annotator pairs") {
  Mention a{"dan", "PER", 0, 0};
  Mention b{"acme", "ORG", 1, 1};
  CHECK(iaa(one_sentence({a, b}), one_sentence({a, b})).f1 == 100.0);
  CHECK(iaa(one_sentence({a}), one_sentence({b})).f1 == 0.0);

  // 9 gold vs 10 predicted with 8 matches
  std::vector<Mention> nine, ten;
  for (int i = 0; i < 8; ++i) {
    Mention m{"m" + std::to_string(i), "PER", std::size_t(i), std::size_t(i)};
    nine.push_back(m);
    ten.push_back(m);
  }
  nine.push_back(Mention{"only-gold", "PER", 8, 8});
  ten.push_back(Mention{"only-pred-1", "PER", 9, 9});
  ten.push_back(Mention{"only-pred-2", "PER", 10, 10});
  EvalReport r = iaa(one_sentence(nine), one_sentence(ten));
  CHECK(r.precision == Catch::Approx(80.0));
  CHECK(r.recall == Catch::Approx(88.9).margin(0.05));
}

TEST_CASE("iaa is reflexive and F1-symmetric") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<Mention>> a(3), b(3);
    for (std::size_t s = 0; s < 3; ++s) {
      for (int i = 0; i < 4; ++i) {
        std::string form = "f" + std::to_string(int(rng() % 5));
        if (rng() % 2) a[s].push_back(Mention{form, "PER", std::size_t(i), std::size_t(i)});
        if (rng() % 2) b[s].push_back(Mention{form, "PER", std::size_t(i), std::size_t(i)});
      }
    }
    bool a_nonempty = false;
    for (const auto& v : a) a_nonempty = a_nonempty || !v.empty();
    if (a_nonempty) CHECK(iaa(a, a).f1 == 100.0);
    EvalReport ab = iaa(a, b), ba = iaa(b, a);
    CHECK(ab.f1 == Catch::Approx(ba.f1).margin(1e-9));
    CHECK(ab.precision == Catch::Approx(ba.recall).margin(1e-9));
  }
}

TEST_CASE("token-level evaluation across the three variants on the golden sentence") {
  Sentence golden = morphtest::golden_sentence();
  std::vector<Sentence> corpus = {golden};

  // token-single prediction equal to gold
  std::vector<std::vector<Label>> single_pred = {golden.token_labels};
  CHECK(eval_token_level_single(corpus, single_pred).f1 == 100.0);

  // token-multi prediction collapses to the same mentions
  std::vector<std::vector<MultiLabel>> multi_pred = {golden.token_multilabels};
  CHECK(eval_token_level_multi(corpus, multi_pred).f1 == 100.0);

  // morpheme prediction grouped by token and collapsed
  std::vector<std::vector<Label>> morph_pred = {golden.morpheme_labels};
  std::vector<std::vector<Morpheme>> used = {golden.morphemes};
  CHECK(eval_token_level_morph(corpus, morph_pred, used).f1 == 100.0);

  // all-O prediction: zero-denominator convention
  std::vector<std::vector<Label>> all_o = {{L("O"), L("O"), L("O")}};
  EvalReport r = eval_token_level_single(corpus, all_o);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
}

TEST_CASE("token-level evaluation of gold morpheme labels is perfect on any gold corpus") {
  // collapse of gold morpheme labels must reproduce the token gold
  std::mt19937_64 rng(31);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 20; ++i) {
    Sentence s;
    std::size_t tokens = 1 + rng() % 5;
    std::size_t morph = 0;
    for (std::size_t t = 0; t < tokens; ++t) {
      s.tokens.push_back(Token{"t" + std::to_string(t), t});
      std::size_t count = 1 + rng() % 3;
      for (std::size_t k = 0; k < count; ++k)
        s.morphemes.push_back(Morpheme{"m" + std::to_string(morph++), "X", t, k});
    }
    std::vector<Label> labels = morphtest::random_wellformed_labels(rng, s.morphemes.size());
    s.morpheme_labels = labels;
    corpus.push_back(s);
  }
  std::vector<std::vector<Label>> pred;
  std::vector<std::vector<Morpheme>> used;
  for (const Sentence& s : corpus) {
    pred.push_back(s.morpheme_labels);
    used.push_back(s.morphemes);
  }
  CHECK(eval_token_level_morph(corpus, pred, used).f1 == 100.0);
}

TEST_CASE("morpheme-level evaluation on the golden sentence") {
  Sentence golden = morphtest::golden_sentence();
  std::vector<Sentence> corpus = {golden};
  std::vector<std::vector<Morpheme>> gold_morphs = {golden.morphemes};

  // morpheme variant, gold segmentation
  std::vector<std::vector<Label>> morph_pred = {golden.morpheme_labels};
  CHECK(eval_morph_level_morph(corpus, morph_pred, gold_morphs).f1 == 100.0);

  // token-multi aligned against gold morphemes
  std::vector<std::vector<MultiLabel>> multi_pred = {golden.token_multilabels};
  CHECK(eval_morph_level_multi(corpus, multi_pred, gold_morphs).f1 == 100.0);

  // token-single evaluated against morpheme-level gold: boundary mismatch
  std::vector<std::vector<Label>> single_pred = {golden.token_labels};
  EvalReport r = eval_morph_level_single(corpus, single_pred);
  CHECK(r.matched_total == 0);
}

TEST_CASE("token-multi morpheme-level evaluation under a shrunken segmentation") {
  // gold: le+ha+bayit with labels O,B,I; predicted segmentation has 2 morphemes,
  // so alignment trims the leading O and the mention shrinks.
  Sentence s;
  s.tokens = {Token{"labayit", 0}};
  s.morphemes = {Morpheme{"le", "IN", 0, 0}, Morpheme{"ha", "DET", 0, 1}, Morpheme{"bayit", "NN", 0, 2}};
  s.morpheme_labels = {L("O"), L("B-ORG"), L("E-ORG")};
  std::vector<Sentence> corpus = {s};

  std::vector<std::vector<MultiLabel>> pred = {{ML("O^B-ORG^E-ORG")}};
  std::vector<std::vector<Morpheme>> predicted_seg = {
      {Morpheme{"le", "IN", 0, 0}, Morpheme{"bayit", "NN", 0, 1}}};
  EvalReport r = eval_morph_level_multi(corpus, pred, predicted_seg);
  // aligned labels: (le,B-ORG),(bayit,E-ORG) -> mention "le bayit" != gold "ha bayit"
  CHECK(r.pred_total == 1);
  CHECK(r.matched_total == 0);
}

TEST_CASE("seg_pos_f1 counts per-token multiset overlap") {
  Sentence gold;
  gold.tokens = {Token{"labayit", 0}};
  gold.morphemes = {Morpheme{"le", "IN", 0, 0}, Morpheme{"ha", "DET", 0, 1},
                    Morpheme{"bayit", "NN", 0, 2}};
  std::vector<Sentence> corpus = {gold};

  // identical -> 100 / 100
  std::vector<std::vector<Morpheme>> same = {gold.morphemes};
  SegPosReport identical = seg_pos_f1(corpus, same);
  CHECK(identical.seg.f1 == 100.0);
  CHECK(identical.seg_pos.f1 == 100.0);

  // le+bayit: seg P=100, R=66.7
  std::vector<std::vector<Morpheme>> shorter = {
      {Morpheme{"le", "IN", 0, 0}, Morpheme{"bayit", "NN", 0, 1}}};
  SegPosReport partial = seg_pos_f1(corpus, shorter);
  CHECK(partial.seg.precision == Catch::Approx(100.0));
  CHECK(partial.seg.recall == Catch::Approx(66.67).margin(0.01));

  // same forms, one wrong POS: seg stays 100, seg+POS drops
  std::vector<std::vector<Morpheme>> wrong_pos = {
      {Morpheme{"le", "IN", 0, 0}, Morpheme{"ha", "NN", 0, 1}, Morpheme{"bayit", "NN", 0, 2}}};
  SegPosReport pos = seg_pos_f1(corpus, wrong_pos);
  CHECK(pos.seg.f1 == 100.0);
  CHECK(pos.seg_pos.f1 < 100.0);

  // coverage mismatch is an error
  std::vector<std::vector<Morpheme>> missing = {{}};
  CHECK_THROWS_AS(seg_pos_f1(corpus, missing), DataError);
}

TEST_CASE("seg score is never below seg+POS score") {
  std::mt19937_64 rng(99);
  std::vector<std::string> forms = {"a", "b", "c"};
  std::vector<std::string> pos = {"NN", "VB"};
  for (int trial = 0; trial < 50; ++trial) {
    Sentence gold;
    std::vector<Morpheme> pred;
    std::size_t tokens = 1 + rng() % 3;
    for (std::size_t t = 0; t < tokens; ++t) {
      gold.tokens.push_back(Token{"t" + std::to_string(t), t});
      std::size_t gn = 1 + rng() % 3, pn = 1 + rng() % 3;
      for (std::size_t k = 0; k < gn; ++k)
        gold.morphemes.push_back(Morpheme{forms[rng() % 3], pos[rng() % 2], t, k});
      for (std::size_t k = 0; k < pn; ++k) pred.push_back(Morpheme{forms[rng() % 3], pos[rng() % 2], t, k});
    }
    std::vector<Sentence> corpus = {gold};
    std::vector<std::vector<Morpheme>> preds = {pred};
    SegPosReport r = seg_pos_f1(corpus, preds);
    CHECK(r.seg.f1 >= r.seg_pos.f1);
    CHECK(r.seg.matched_total <= std::min(r.seg.gold_total, r.seg.pred_total));
  }
}

namespace {

TrainVocab toy_vocab() {
  TrainVocab v;
  v.tokens = {"tasnu", "mithailand", "lesin", "dan"};
  v.morphemes = {"tasnu", "mi", "thailand", "le", "sin", "dan"};
  return v;
}

}  // namespace

TEST_CASE("ootv_categorize distinguishes the four categories") {
  TrainVocab vocab = toy_vocab();
  // unseen token "lethailand" made of seen morphemes le + thailand
  std::vector<std::string> forms = {"lethailand"};
  std::vector<std::vector<std::string>> morphs = {{"le", "thailand"}};
  CHECK(ootv_categorize(forms, morphs, vocab) == OotvCategory::compositional);

  // unseen single-morpheme token
  forms = {"berlin"};
  morphs = {{"berlin"}};
  CHECK(ootv_categorize(forms, morphs, vocab) == OotvCategory::lexical);

  // all tokens seen
  forms = {"dan"};
  morphs = {{"dan"}};
  CHECK(ootv_categorize(forms, morphs, vocab) == OotvCategory::known);

  // unseen token with an unseen morpheme
  forms = {"leberlin"};
  morphs = {{"le", "berlin"}};
  CHECK(ootv_categorize(forms, morphs, vocab) == OotvCategory::lexcomp);

  // multi-token mention takes the hardest category
  forms = {"dan", "leberlin"};
  morphs = {{"dan"}, {"le", "berlin"}};
  CHECK(ootv_categorize(forms, morphs, vocab) == OotvCategory::lexcomp);

  CHECK_THROWS_AS(ootv_categorize(std::vector<std::string>{},
                                  std::vector<std::vector<std::string>>{}, vocab),
                  DataError);
}

namespace {

Sentence ootv_sentence(const std::string& token, const std::vector<std::string>& morphs,
                       const std::string& category) {
  Sentence s;
  s.tokens = {Token{token, 0}};
  for (std::size_t k = 0; k < morphs.size(); ++k) s.morphemes.push_back(Morpheme{morphs[k], "X", 0, k});
  s.token_labels = {Label{'S', category}};
  return s;
}

}  // namespace

TEST_CASE("ootv_breakdown groups and credits mentions") {
  TrainVocab vocab = toy_vocab();
  std::vector<Sentence> corpus = {
      ootv_sentence("dan", {"dan"}, "PER"),                    // Known
      ootv_sentence("lethailand", {"le", "thailand"}, "GPE"),  // Compositional
      ootv_sentence("berlin", {"berlin"}, "GPE"),              // Lexical
      ootv_sentence("leberlin", {"le", "berlin"}, "GPE"),      // LexComp
  };
  std::vector<std::vector<Mention>> perfect;
  for (const Sentence& s : corpus) perfect.push_back(gold_token_mentions(s));

  auto groups = ootv_breakdown(corpus, perfect, vocab);
  REQUIRE(groups.size() == 4);
  for (const auto& [cat, report] : groups) {
    CHECK(report.gold_total == 1);
    CHECK(report.f1 == 100.0);
  }

  // empty predictions: every group has recall 0
  std::vector<std::vector<Mention>> empty(corpus.size());
  groups = ootv_breakdown(corpus, empty, vocab);
  for (const auto& [cat, report] : groups) {
    CHECK(report.recall == 0.0);
  }

  // Known-only corpus yields a single group
  std::vector<Sentence> known = {ootv_sentence("dan", {"dan"}, "PER")};
  std::vector<std::vector<Mention>> kp = {gold_token_mentions(known[0])};
  auto only = ootv_breakdown(known, kp, vocab);
  REQUIRE(only.size() == 1);
  CHECK(only.begin()->first == OotvCategory::known);

  // an unmatched prediction lands in the group of its own categorization
  std::vector<Sentence> one = {ootv_sentence("berlin", {"berlin"}, "GPE")};
  std::vector<std::vector<Mention>> wrong_cat = {{Mention{"berlin", "PER", 0, 0}}};
  auto credited = ootv_breakdown(one, wrong_cat, vocab);
  CHECK(credited.at(OotvCategory::lexical).pred_total == 1);
  CHECK(credited.at(OotvCategory::lexical).matched_total == 0);

  auto counts = ootv_counts(corpus, vocab);
  CHECK(counts.at(OotvCategory::known) == 1);
  CHECK(counts.at(OotvCategory::compositional) == 1);
  CHECK(counts.at(OotvCategory::lexical) == 1);
  CHECK(counts.at(OotvCategory::lexcomp) == 1);
}

TEST_CASE("TrainVocab collects both granularities") {
  Sentence s = morphtest::golden_sentence();
  std::vector<Sentence> corpus = {s};
  TrainVocab v = TrainVocab::from_sentences(corpus);
  CHECK(v.tokens.count("labayit") == 1);
  CHECK(v.morphemes.count("bayit") == 1);
  CHECK(v.tokens.count("bayit") == 0);
}
