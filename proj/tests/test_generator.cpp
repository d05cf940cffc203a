#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"

using namespace blm;

namespace {

const Lexicon& lex() { return fx::demo_lexicon(); }

// Index of the lexicon entry whose singular or plural form is `surface`.
std::size_t entry_of(const std::vector<NumberedForm>& forms, const std::string& surface) {
  for (std::size_t i = 0; i < forms.size(); ++i)
    if (forms[i].sg == surface || forms[i].pl == surface) return i;
  ADD_FAILURE() << "surface not in lexicon: " << surface;
  return SIZE_MAX;
}

std::size_t alt_verb_of(const std::string& surface) {
  for (std::size_t i = 0; i < lex().alt_verbs.size(); ++i) {
    const auto& v = lex().alt_verbs[i];
    if (surface == v.active_form || surface == v.passive_form || surface == v.intransitive_form)
      return i;
  }
  ADD_FAILURE() << "verb not in lexicon: " << surface;
  return SIZE_MAX;
}

const Chunk& chunk(const SentenceRecord& s, ChunkRole r) {
  for (const auto& c : s.chunks)
    if (c.role == r) return c;
  throw std::runtime_error("missing chunk");
}

std::set<std::string> keys(const std::vector<BlmInstance>& v, GroupField f) {
  std::set<std::string> out;
  for (const auto& i : v) out.insert(split_key(i, f));
  return out;
}

}  // namespace

TEST(Generate, TypeIAgreementSharesLemmasAcrossContext) {
  const auto inst = generate(Task::Agreement, LexType::TypeI, lex(), 1, 7).at(0);
  std::set<std::size_t> nouns, pp1s, verbs;
  for (const auto& s : inst.context) {
    nouns.insert(entry_of(lex().nouns, chunk(s, ChunkRole::NpSubj).surface));
    pp1s.insert(entry_of(lex().pp1, chunk(s, ChunkRole::Pp1).surface));
    verbs.insert(entry_of(lex().agr_verbs, chunk(s, ChunkRole::Vp).surface));
  }
  EXPECT_EQ(nouns.size(), 1u);
  EXPECT_EQ(pp1s.size(), 1u);
  EXPECT_EQ(verbs.size(), 1u);
  std::set<std::string> texts;
  for (const auto& s : inst.context) texts.insert(s.text);
  EXPECT_EQ(texts.size(), 7u);
}

TEST(Generate, TypeIIIOdVariesVerbs) {
  const auto inst = generate(Task::Od, LexType::TypeIII, lex(), 1, 7).at(0);
  std::set<std::size_t> verbs;
  for (const auto& s : inst.context) {
    const auto& v = s.chunks[1];
    verbs.insert(alt_verb_of(v.surface));
  }
  EXPECT_GE(verbs.size(), 2u);
}

TEST(Generate, TypeIIHoldsVerbFixedAndVariesOthers) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto draw = [&] {
      Rng rng(seed);
      return draw_lexical(Task::Caus, LexType::TypeII, lex(), rng);
    }();
    std::set<std::size_t> verbs, agents;
    for (std::size_t r = 0; r < kContextSize; ++r) {
      verbs.insert(draw.rows[r].verb);
      agents.insert(draw.rows[r].agent);
    }
    EXPECT_EQ(verbs.size(), 1u);
    EXPECT_GE(agents.size(), 2u);
    EXPECT_EQ(lex().alt_verbs.at(draw.rows[0].verb).verb_class, Task::Caus);
  }
}

TEST(Generate, Deterministic) {
  for (Task t : kAllTasks) {
    const auto a = generate(t, LexType::TypeIII, lex(), 30, 99);
    const auto b = generate(t, LexType::TypeIII, lex(), 30, 99);
    EXPECT_EQ(a, b);
    std::string la, lb;
    for (const auto& i : a) la += instance_to_line(i);
    for (const auto& i : b) lb += instance_to_line(i);
    EXPECT_EQ(la, lb);
    EXPECT_NE(a, generate(t, LexType::TypeIII, lex(), 30, 100));
  }
}

TEST(Generate, CorrectPositionIsShuffled) {
  std::set<std::size_t> positions;
  for (const auto& inst : generate(Task::Agreement, LexType::TypeI, lex(), 200, 1))
    positions.insert(inst.correct_index);
  EXPECT_EQ(positions.size(), kAnswerCount);
}

TEST(Generate, InadequateLexiconNamesSlot) {
  Lexicon small = lex();
  small.da_nps.clear();
  try {
    generate(Task::Caus, LexType::TypeI, small, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kData);
    EXPECT_NE(std::string(e.what()).find("da_nps"), std::string::npos);
  }
  EXPECT_THROW(generate(Task::Agreement, LexType::TypeI, lex(), 0, 1), Error);
}

TEST(Generate, AlternationSurfaces) {
  LexicalDraw d;
  const auto inst = build_instance(Task::Caus, LexType::TypeI, lex(), d);
  const auto& verb = lex().alt_verbs.at(0);
  ASSERT_EQ(verb.verb_class, Task::Caus);
  // Row 1: Ag Akt Pat P-NP, transitive.
  EXPECT_EQ(inst.context[0].chunks[1].surface, verb.active_form);
  // Row 7 (Caus): Pat Akt P-NP, intransitive.
  EXPECT_EQ(inst.context[6].chunks[1].surface, verb.intransitive_form);
  EXPECT_EQ(inst.context[2].chunks[2].surface, lex().agents.at(0).da_form);
  EXPECT_EQ(inst.group_key, verb.lemma);
  EXPECT_EQ(inst.correct_index, 0u);
}

TEST(Generate, AgreementCoordSurface) {
  LexicalDraw d;
  const auto inst = build_instance(Task::Agreement, LexType::TypeI, lex(), d);
  const auto& coord = inst.answers[1];
  ASSERT_EQ(coord.label, AnswerLabel::Coord);
  EXPECT_EQ(chunk(coord.sentence, ChunkRole::Pp2).surface, "e " + lex().pp2.at(0).sg);
  EXPECT_EQ(inst.group_key, inst.answers[0].sentence.text);
  EXPECT_EQ(inst.answers[0].sentence.text.back(), '.');
}

// ---------------------------------------------------------------------------
// apportionment and split

namespace {

// Exhaustive search for the smallest L1 distance to the exact quotas over
// allocations that give every positive-weight part at least one group.
double best_l1(std::size_t n, const std::array<double, 3>& w) {
  const double total = w[0] + w[1] + w[2];
  double best = 1e300;
  for (std::size_t a = 0; a <= n; ++a)
    for (std::size_t b = 0; a + b <= n; ++b) {
      const std::array<std::size_t, 3> x{a, b, n - a - b};
      bool ok = true;
      double d = 0.0;
      for (int i = 0; i < 3; ++i) {
        if (w[i] > 0 && x[i] == 0) ok = false;
        if (w[i] == 0 && x[i] != 0) ok = false;
        d += std::abs(static_cast<double>(x[i]) - static_cast<double>(n) * w[i] / total);
      }
      if (ok) best = std::min(best, d);
    }
  return best;
}

double l1(const std::array<std::size_t, 3>& x, std::size_t n, const std::array<double, 3>& w) {
  const double total = w[0] + w[1] + w[2];
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    d += std::abs(static_cast<double>(x[i]) - static_cast<double>(n) * w[i] / total);
  return d;
}

}  // namespace

TEST(Apportion, ThirteenGroups) {
  const std::array<double, 3> w{90, 20, 10};
  const auto a = apportion(13, w);
  EXPECT_EQ(a, (std::array<std::size_t, 3>{10, 2, 1}));
  EXPECT_NEAR(l1(a, 13, w), best_l1(13, w), 1e-12);
}

TEST(Apportion, MatchesExhaustiveOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 400; ++trial) {
    std::array<double, 3> w{};
    for (auto& x : w) x = uniform01(rng) < 0.15 ? 0.0 : 0.01 + 100.0 * uniform01(rng);
    if (w[0] + w[1] + w[2] == 0) w[0] = 1;
    std::size_t positive = 0;
    for (double x : w) positive += x > 0;
    const std::size_t n = positive + uniform_index(rng, 40);
    const auto a = apportion(n, w);
    EXPECT_EQ(a[0] + a[1] + a[2], n);
    for (int i = 0; i < 3; ++i)
      if (w[i] > 0) {
        EXPECT_GE(a[i], 1u);
      }
    EXPECT_NEAR(l1(a, n, w), best_l1(n, w), 1e-9) << n << " " << w[0] << "," << w[1] << ","
                                                  << w[2];
  }
}

TEST(Apportion, Errors) {
  EXPECT_THROW(apportion(2, {90, 20, 10}), Error);
  EXPECT_THROW(apportion(5, {0, 0, 0}), Error);
  EXPECT_THROW(apportion(5, {-1, 2, 3}), Error);
  EXPECT_EQ(apportion(1, {1, 0, 0}), (std::array<std::size_t, 3>{1, 0, 0}));
}

TEST(Split, DisjointAndCovering) {
  const auto data = generate(Task::Agreement, LexType::TypeII, lex(), 300, 5);
  SplitSpec spec;
  const auto parts = split(data, spec, 17);
  EXPECT_EQ(parts.train.size() + parts.dev.size() + parts.test.size(), data.size());
  const auto tr = keys(parts.train, spec.group_field), dv = keys(parts.dev, spec.group_field),
             te = keys(parts.test, spec.group_field);
  for (const auto& k : tr) {
    EXPECT_FALSE(dv.count(k));
    EXPECT_FALSE(te.count(k));
  }
  for (const auto& k : dv) EXPECT_FALSE(te.count(k));
  EXPECT_FALSE(parts.dev.empty());
  EXPECT_FALSE(parts.test.empty());
  EXPECT_GT(parts.train.size(), parts.dev.size());
  const auto again = split(data, spec, 17);
  EXPECT_EQ(again.train, parts.train);
  EXPECT_EQ(again.test, parts.test);
}

TEST(Split, AlternationsGroupByVerbLemma) {
  const auto data = generate(Task::Od, LexType::TypeI, lex(), 100, 8);
  SplitSpec spec;
  spec.group_field = default_group_field(Task::Od);
  const auto parts = split(data, spec, 3);
  const auto tr = keys(parts.train, spec.group_field), te = keys(parts.test, spec.group_field);
  for (const auto& k : te) EXPECT_FALSE(tr.count(k));
  EXPECT_EQ(tr.size() + keys(parts.dev, spec.group_field).size() + te.size(),
            lex().verbs_of(Task::Od).size());
}

TEST(Split, SingleGroupIsAnError) {
  auto data = generate(Task::Caus, LexType::TypeI, lex(), 10, 1);
  for (auto& d : data) d.group_key = "same";
  SplitSpec spec;
  spec.group_field = GroupField::VerbLemma;
  EXPECT_THROW(split(data, spec, 1), Error);
}
