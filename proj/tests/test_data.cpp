#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace blm;

namespace {

constexpr auto S = Number::Sg;
constexpr auto P = Number::Pl;

// (NP, PP1, PP2 or none, VP) numbers of an agreement row.
struct AgrNumbers {
  Number np, pp1;
  std::optional<Number> pp2;
  Number vp;
  bool coord = false;
};

AgrNumbers numbers_of(const PatternRow& row) {
  AgrNumbers n{Number::NA, Number::NA, std::nullopt, Number::NA};
  for (const auto& s : row) {
    switch (s.role) {
      case ChunkRole::NpSubj: n.np = s.number; break;
      case ChunkRole::Pp1: n.pp1 = s.number; break;
      case ChunkRole::Pp2: n.pp2 = s.number; n.coord = s.coordinated; break;
      case ChunkRole::Vp: n.vp = s.number; break;
      default: ADD_FAILURE() << "unexpected role";
    }
  }
  return n;
}

void expect_row(const PatternRow& row, Number np, Number pp1, std::optional<Number> pp2,
                Number vp, bool coord = false) {
  const auto n = numbers_of(row);
  EXPECT_EQ(n.np, np);
  EXPECT_EQ(n.pp1, pp1);
  EXPECT_EQ(n.pp2, pp2);
  EXPECT_EQ(n.vp, vp);
  EXPECT_EQ(n.coord, coord);
}

std::vector<ChunkRole> roles(const PatternRow& row) {
  std::vector<ChunkRole> out;
  for (const auto& s : row) out.push_back(s.role);
  return out;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (Task t : kAllTasks) EXPECT_EQ(parse_task(task_name(t)), t);
  EXPECT_EQ(parse_task("agr"), Task::Agreement);
  EXPECT_FALSE(parse_task("agreements"));
  for (auto t : {LexType::TypeI, LexType::TypeII, LexType::TypeIII})
    EXPECT_EQ(parse_lex_type(lex_type_name(t)), t);
  EXPECT_EQ(parse_lex_type("2"), LexType::TypeII);
  for (auto l : kAllLabels) EXPECT_EQ(parse_label(label_name(l)), l);
  EXPECT_EQ(label_name(AnswerLabel::IInt), "I-Int");
  EXPECT_EQ(label_name(AnswerLabel::IERPass), "IER-Pass");
}

TEST(AgreementTemplate, ContextRows) {
  const auto rows = agreement_context_pattern();
  expect_row(rows[0], S, S, std::nullopt, S);
  expect_row(rows[1], P, S, std::nullopt, P);
  expect_row(rows[2], S, P, std::nullopt, S);
  expect_row(rows[3], P, P, std::nullopt, P);
  expect_row(rows[4], S, S, S, S);
  expect_row(rows[5], P, S, S, P);
  expect_row(rows[6], S, P, S, S);
  EXPECT_EQ(pattern_tag(rows[6]), "NP.sg PP1.pl PP2.sg VP.sg");
  for (int r = 0; r < 4; ++r) EXPECT_FALSE(numbers_of(rows[r]).pp2) << "row " << r + 1;
}

TEST(AgreementTemplate, AnswerRows) {
  const auto rows = agreement_answer_patterns();
  int correct = 0;
  for (const auto& r : rows) correct += r.label == AnswerLabel::Correct;
  EXPECT_EQ(correct, 1);
  auto find = [&](AnswerLabel l) -> const PatternRow& {
    for (const auto& r : rows)
      if (r.label == l) return r.pattern;
    throw std::runtime_error("label missing");
  };
  expect_row(find(AnswerLabel::Correct), P, P, S, P);
  EXPECT_EQ(pattern_tag(find(AnswerLabel::Correct)), "NP.pl PP1.pl PP2.sg VP.pl");
  expect_row(find(AnswerLabel::Coord), P, P, S, P, true);
  expect_row(find(AnswerLabel::WNA), P, P, std::nullopt, P);
  expect_row(find(AnswerLabel::WN1), P, S, S, P);
  expect_row(find(AnswerLabel::WN2), P, P, P, P);
  expect_row(find(AnswerLabel::AEV), P, P, P, S);
  expect_row(find(AnswerLabel::AEN1), P, S, P, S);
  expect_row(find(AnswerLabel::AEN2), P, P, S, S);
}

TEST(AlternationTemplate, ContextRows) {
  using R = ChunkRole;
  const auto caus = alternation_context_pattern(Task::Caus);
  const auto od = alternation_context_pattern(Task::Od);
  for (int r = 0; r < 6; ++r) EXPECT_EQ(caus[r], od[r]) << "row " << r + 1;
  EXPECT_EQ(roles(caus[0]), (std::vector<R>{R::Ag, R::AktV, R::Pat, R::PNp}));
  EXPECT_EQ(roles(caus[3]), (std::vector<R>{R::Pat, R::PassV, R::DaAg, R::DaNp}));
  EXPECT_EQ(roles(caus[6]), (std::vector<R>{R::Pat, R::AktV, R::PNp}));
  EXPECT_EQ(roles(od[6]), (std::vector<R>{R::Ag, R::AktV, R::PNp}));
  EXPECT_EQ(pattern_tag(caus[2]), "Pat Pass da-Ag P-NP");
}

TEST(AlternationTemplate, AnswerLabelsArePermuted) {
  const auto caus = alternation_answer_patterns(Task::Caus);
  const auto od = alternation_answer_patterns(Task::Od);
  EXPECT_EQ(caus[0].label, AnswerLabel::Correct);
  EXPECT_EQ(caus[1].label, AnswerLabel::IInt);
  EXPECT_EQ(od[1].label, AnswerLabel::Correct);
  const std::array<AnswerLabel, 8> caus_labels{
      AnswerLabel::Correct, AnswerLabel::IInt,    AnswerLabel::ERPass, AnswerLabel::IERPass,
      AnswerLabel::RTrans,  AnswerLabel::IRTrans, AnswerLabel::EWrBy,  AnswerLabel::IEWrBy};
  const std::array<AnswerLabel, 8> od_labels{
      AnswerLabel::IInt,    AnswerLabel::Correct, AnswerLabel::IERPass, AnswerLabel::ERPass,
      AnswerLabel::IRTrans, AnswerLabel::RTrans,  AnswerLabel::IEWrBy,  AnswerLabel::EWrBy};
  EXPECT_EQ(task_labels(Task::Caus), caus_labels);
  EXPECT_EQ(task_labels(Task::Od), od_labels);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(caus[i].pattern, od[i].pattern);
}

TEST(AlternationTemplate, RejectsAgreement) {
  try {
    alternation_context_pattern(Task::Agreement);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kUsage);
  }
  EXPECT_THROW(alternation_answer_patterns(Task::Agreement), Error);
}

TEST(PatternTag, CanonicalForm) {
  PatternRow row{{ChunkRole::NpSubj, S}, {ChunkRole::Pp1, P}, {ChunkRole::Vp, S}};
  EXPECT_EQ(pattern_tag(row), "NP.sg PP1.pl VP.sg");
  std::vector<Chunk> a{{ChunkRole::NpSubj, S, "il vaso"}, {ChunkRole::Vp, S, "cade"}};
  std::vector<Chunk> b{{ChunkRole::NpSubj, S, "il libro"}, {ChunkRole::Vp, S, "resta"}};
  EXPECT_EQ(pattern_tag(a), pattern_tag(b));
  PatternRow coord{{ChunkRole::Pp2, S, true}};
  EXPECT_EQ(pattern_tag(coord), "e-PP2.sg");
  EXPECT_THROW(pattern_tag(PatternRow{}), Error);
}

TEST(MakeSentence, IdDependsOnTextAndStructure) {
  std::vector<Chunk> c{{ChunkRole::NpSubj, S, "il vaso"}, {ChunkRole::Vp, S, "cade"}};
  const auto a = make_sentence(Task::Agreement, c, "Il vaso cade.");
  const auto b = make_sentence(Task::Agreement, c, "Il vaso cade.");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.id.rfind("agr-", 0), 0u);
  EXPECT_EQ(a.id.size(), 4u + 16u);
  EXPECT_NE(a.id, make_sentence(Task::Agreement, c, "Il vaso cadde.").id);
  auto c2 = c;
  c2[1].number = P;
  EXPECT_NE(a.id, make_sentence(Task::Agreement, c2, "Il vaso cade.").id);
  EXPECT_EQ(make_sentence(Task::Od, c, "x").id.rfind("od-", 0), 0u);
}

TEST(Validate, RejectsBrokenInstances) {
  auto inst = generate(Task::Agreement, LexType::TypeI, fx::demo_lexicon(), 1, 3).at(0);
  EXPECT_NO_THROW(validate(inst));
  auto wrong_index = inst;
  wrong_index.correct_index = (inst.correct_index + 1) % kAnswerCount;
  EXPECT_THROW(validate(wrong_index), Error);
  auto dup = inst;
  dup.answers[(inst.correct_index + 1) % kAnswerCount].label = AnswerLabel::Correct;
  EXPECT_THROW(validate(dup), Error);
  auto no_group = inst;
  no_group.group_key.clear();
  EXPECT_THROW(validate(no_group), Error);
  auto bad_tag = inst;
  bad_tag.context[0].pattern_tag = "NP.pl";
  EXPECT_THROW(validate(bad_tag), Error);
}

// ---------------------------------------------------------------------------
// lexicon

TEST(Lexicon, DemoIsAdequateForEveryTask) {
  const auto& lex = fx::demo_lexicon();
  for (Task t : kAllTasks) EXPECT_NO_THROW(check_adequate(lex, t));
  EXPECT_FALSE(lex.verbs_of(Task::Caus).empty());
  EXPECT_FALSE(lex.verbs_of(Task::Od).empty());
}

TEST(Lexicon, ParsesSectionsAndComments) {
  const auto lex = parse_lexicon(
      "# comment\n[nouns]\nil vaso | i vasi\n\n[pp_modifiers]\nPP1 | con il fiore | con i "
      "fiori\n[alt_verbs]\ncaus | chiudere | chiuse | fu chiusa | si chiuse\n");
  ASSERT_EQ(lex.nouns.size(), 1u);
  EXPECT_EQ(lex.nouns[0].form(P), "i vasi");
  ASSERT_EQ(lex.pp1.size(), 1u);
  ASSERT_EQ(lex.alt_verbs.size(), 1u);
  EXPECT_EQ(lex.alt_verbs[0].passive_form, "fu chiusa");
  try {
    check_adequate(lex, Task::Agreement);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kData);
    EXPECT_NE(std::string(e.what()).find("PP2"), std::string::npos);
  }
}

TEST(Lexicon, ReportsLineOfBadEntry) {
  try {
    parse_lexicon("[nouns]\nil vaso | i vasi\nil libro\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_lexicon("[verbs]\n"), Error);
  EXPECT_THROW(parse_lexicon("il vaso | i vasi\n"), Error);
  EXPECT_THROW(parse_lexicon("[alt_verbs]\nagreement | a | b | c | d\n"), Error);
  try {
    load_lexicon("/nonexistent/demo.lex");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kNotFound);
  }
}

// ---------------------------------------------------------------------------
// dataset files

TEST(DatasetIo, RoundTripOd) {
  fx::TempDir dir("io");
  const auto data = generate(Task::Od, LexType::TypeIII, fx::demo_lexicon(), 240, 11);
  save_dataset(data, dir.file("od.blm"));
  EXPECT_EQ(load_dataset(dir.file("od.blm")), data);
}

TEST(DatasetIo, RoundTripAgreementWithCoordination) {
  const auto data = generate(Task::Agreement, LexType::TypeII, fx::demo_lexicon(), 20, 5);
  std::stringstream ss;
  for (const auto& inst : data) ss << instance_to_line(inst) << '\n';
  EXPECT_EQ(parse_dataset(ss, "mem"), data);
}

TEST(DatasetIo, EmptyFileIsEmptyList) {
  std::stringstream ss;
  EXPECT_TRUE(parse_dataset(ss, "empty").empty());
}

TEST(DatasetIo, TruncatedFileNamesTheLine) {
  const auto data = generate(Task::Caus, LexType::TypeI, fx::demo_lexicon(), 3, 2);
  std::string text;
  for (const auto& inst : data) text += instance_to_line(inst) + "\n";
  text.resize(text.size() - 40);
  std::stringstream ss(text);
  try {
    parse_dataset(ss, "cut.blm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
    EXPECT_NE(std::string(e.what()).find("cut.blm:3:"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, RejectsStructurallyInvalidRecord) {
  auto inst = generate(Task::Caus, LexType::TypeI, fx::demo_lexicon(), 1, 2).at(0);
  inst.correct_index = (inst.correct_index + 1) % kAnswerCount;
  std::stringstream ss(instance_to_line(inst) + "\n");
  EXPECT_THROW(parse_dataset(ss, "bad"), Error);
}

TEST(DatasetIo, MissingFileIsNotFound) {
  try {
    load_dataset("/nonexistent/x.blm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kNotFound);
  }
}

TEST(Inventory, CountsAndDeduplicates) {
  const auto one = generate(Task::Agreement, LexType::TypeIII, fx::demo_lexicon(), 1, 9);
  EXPECT_EQ(sentence_inventory(one).size(), 15u);
  std::vector<BlmInstance> twice{one[0], one[0]};
  twice[1].group_key = "other";
  EXPECT_EQ(sentence_inventory(twice).size(), 15u);
  auto clash = twice;
  clash[1].context[0].text = "Diverso.";
  EXPECT_THROW(sentence_inventory(clash), Error);
}

TEST(Inventory, FileHasIdAndText) {
  fx::TempDir dir("inv");
  const auto data = generate(Task::Od, LexType::TypeI, fx::demo_lexicon(), 2, 4);
  const auto recs = sentence_inventory(data);
  save_inventory(recs, dir.file("inv.jsonl"));
  std::ifstream in(dir.file("inv.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("id").get<std::string>(), recs[n].id);
    EXPECT_EQ(j.at("text").get<std::string>(), recs[n].text);
    EXPECT_EQ(j.size(), 2u);
    ++n;
  }
  EXPECT_EQ(n, recs.size());
}
