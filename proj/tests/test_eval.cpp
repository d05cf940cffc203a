#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace blm;

namespace {

ReportKey key(const std::string& regime = "single", Task t = Task::Agreement,
              LexType test = LexType::TypeI) {
  return {regime, t, LexType::TypeI, test};
}

EvalFragment fragment(std::size_t n, std::size_t correct, const ReportKey& k = key()) {
  EvalFragment f;
  f.key = k;
  f.n = n;
  f.correct = correct;
  f.label_counts[AnswerLabel::Correct] = correct;
  if (n > correct) f.label_counts[AnswerLabel::WN1] = n - correct;
  return f;
}

EvalReport report(const std::string& regime, Task t, double f1,
                  std::map<AnswerLabel, double> labels = {}) {
  EvalReport r;
  r.key = key(regime, t);
  r.f1_mean = f1;
  r.n_runs = 1;
  r.run_f1 = {f1};
  r.label_distribution = std::move(labels);
  r.label_distribution[AnswerLabel::Correct] = f1;
  return r;
}

}  // namespace

TEST(Evaluate, AllCorrect) {
  const auto s = fx::oracle_set(Task::Agreement, LexType::TypeI, 40, 1, 32);
  const auto f = evaluate([](const InstanceView& v) { return v.correct; }, s->views, key());
  EXPECT_EQ(f.n, 40u);
  EXPECT_EQ(f.correct, 40u);
  EXPECT_DOUBLE_EQ(f.f1(), 1.0);
  const auto r = aggregate({f});
  EXPECT_EQ(r.label_distribution, (std::map<AnswerLabel, double>{{AnswerLabel::Correct, 1.0}}));
  EXPECT_EQ(r.f1_std, 0.0);
}

TEST(Evaluate, RandomPredictorNearChance) {
  const auto s = fx::oracle_set(Task::Caus, LexType::TypeIII, 10000, 2, 32, 0.0);
  Rng rng(3);
  const auto f = evaluate([&](const InstanceView&) { return uniform_index(rng, kAnswerCount); },
                          s->views, key("single", Task::Caus));
  EXPECT_NEAR(f.f1(), 0.125, 0.01);
  double total = 0;
  const auto r = aggregate({f});
  for (const auto& [l, p] : r.label_distribution) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(r.label_distribution.at(AnswerLabel::Correct), r.f1_mean);
}

TEST(Evaluate, RejectsEmptyAndOutOfRange) {
  EXPECT_THROW(evaluate([](const InstanceView&) { return std::size_t{0}; },
                        std::vector<InstanceView>{}, key()),
               Error);
  const auto s = fx::oracle_set(Task::Od, LexType::TypeI, 2, 1, 32);
  EXPECT_THROW(evaluate([](const InstanceView&) { return std::size_t{8}; }, s->views, key()),
               Error);
}

TEST(Aggregate, MeanAndPopulationStd) {
  const auto r = aggregate({fragment(10, 9), fragment(10, 9), fragment(10, 9)});
  EXPECT_NEAR(r.f1_mean, 0.9, 1e-12);
  EXPECT_NEAR(r.f1_std, 0.0, 1e-12);
  EXPECT_EQ(r.n_runs, 3u);
  const auto two = aggregate({fragment(4, 4), fragment(4, 0)});
  EXPECT_DOUBLE_EQ(two.f1_mean, 0.5);
  EXPECT_DOUBLE_EQ(two.f1_std, 0.5);
  EXPECT_DOUBLE_EQ(two.label_distribution.at(AnswerLabel::WN1), 0.5);
  const auto one = aggregate({fragment(7, 3)});
  EXPECT_DOUBLE_EQ(one.f1_mean, 3.0 / 7.0);
  EXPECT_EQ(one.f1_std, 0.0);
}

TEST(Aggregate, OrderInvariant) {
  std::vector<EvalFragment> fs{fragment(13, 5), fragment(13, 11), fragment(13, 7),
                               fragment(13, 2)};
  const auto a = aggregate(fs);
  std::reverse(fs.begin(), fs.end());
  const auto b = aggregate(fs);
  std::swap(fs[0], fs[2]);
  const auto c = aggregate(fs);
  EXPECT_EQ(report_to_json(a), report_to_json(b));
  EXPECT_EQ(report_to_json(a), report_to_json(c));
}

TEST(Aggregate, Errors) {
  EXPECT_THROW(aggregate({}), Error);
  try {
    aggregate({fragment(5, 1), fragment(5, 1, key("single", Task::Od))});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kData);
    EXPECT_NE(std::string(e.what()).find("od"), std::string::npos);
  }
}

TEST(Compare, IdenticalInputsGiveZeroDeltas) {
  const std::vector<EvalReport> rs{report("single", Task::Agreement, 0.8, {{AnswerLabel::WN1, 0.2}}),
                                   report("single", Task::Od, 0.6)};
  const auto c = compare(rs, rs);
  ASSERT_EQ(c.rows.size(), 2u);
  for (const auto& row : c.rows) {
    EXPECT_EQ(row.delta, 0.0);
    for (const auto& [l, d] : row.label_delta) EXPECT_EQ(d, 0.0);
  }
}

TEST(Compare, SignedDeltas) {
  const auto c = compare({report("single", Task::Caus, 0.909, {{AnswerLabel::ERPass, 0.05}})},
                         {report("multi", Task::Caus, 0.772, {{AnswerLabel::IInt, 0.1}})});
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_NEAR(c.rows[0].delta, -0.137, 1e-12);
  EXPECT_NEAR(c.rows[0].label_delta.at(AnswerLabel::ERPass), -0.05, 1e-12);
  EXPECT_NEAR(c.rows[0].label_delta.at(AnswerLabel::IInt), 0.1, 1e-12);
  EXPECT_NE(render_comparison(c).find("-0.137"), std::string::npos);
}

TEST(Compare, MissingCounterpart) {
  try {
    compare({report("single", Task::Caus, 0.9), report("single", Task::Od, 0.9)},
            {report("multi", Task::Caus, 0.9)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kData);
    EXPECT_NE(std::string(e.what()).find("single/od"), std::string::npos) << e.what();
  }
}

TEST(ReportFile, JsonRoundTrip) {
  const auto r = aggregate({fragment(10, 7), fragment(10, 8)});
  EXPECT_EQ(report_to_json(report_from_json(report_to_json(r))), report_to_json(r));
  fx::TempDir dir("report");
  save_reports({r, r}, dir.file("r.json"));
  const auto back = load_reports(dir.file("r.json"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(report_to_json(back[1]), report_to_json(r));
  std::ofstream(dir.file("one.json")) << report_to_json(r).dump();
  EXPECT_EQ(load_reports(dir.file("one.json")).size(), 1u);
  std::ofstream(dir.file("bad.json")) << "{\"regime\": 3}";
  EXPECT_THROW(load_reports(dir.file("bad.json")), Error);
  EXPECT_THROW(load_reports(dir.file("none.json")), Error);
  EXPECT_NE(render_reports({r}).find("0.750 (0.050)"), std::string::npos) << render_reports({r});
}
