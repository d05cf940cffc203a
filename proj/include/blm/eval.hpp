#pragma once

// Scoring, aggregation over runs, and single- vs multi-task comparison.
//
// F1 here is micro-averaged over single-label predictions, which equals
// accuracy (#correct / #instances).

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "blm/data.hpp"
#include "blm/embeddings.hpp"
#include "blm/error.hpp"
#include "blm/model.hpp"

namespace blm {

struct ReportKey {
  std::string regime;
  Task task = Task::Agreement;
  LexType train_type = LexType::TypeI;
  LexType test_type = LexType::TypeI;

  auto tie() const { return std::tie(regime, task, train_type, test_type); }
  friend bool operator==(const ReportKey& a, const ReportKey& b) { return a.tie() == b.tie(); }
  friend bool operator<(const ReportKey& a, const ReportKey& b) { return a.tie() < b.tie(); }
};

inline std::string describe(const ReportKey& k) {
  return k.regime + "/" + std::string(task_name(k.task)) + "/train-" +
         std::string(lex_type_name(k.train_type)) + "/test-" +
         std::string(lex_type_name(k.test_type));
}

// One run on one test set.
struct EvalFragment {
  ReportKey key;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::map<AnswerLabel, std::size_t> label_counts;  // label of each chosen candidate

  double f1() const { return static_cast<double>(correct) / static_cast<double>(n); }
};

struct EvalReport {
  ReportKey key;
  double f1_mean = 0.0;
  double f1_std = 0.0;  // population
  std::size_t n_runs = 0;
  std::vector<double> run_f1;
  std::map<AnswerLabel, double> label_distribution;
};

// choose(view) returns the chosen candidate index.
template <class Choose>
EvalFragment evaluate(Choose&& choose, const std::vector<InstanceView>& test, ReportKey key) {
  if (test.empty()) fail(ErrorCategory::kData, "empty test set");
  EvalFragment f;
  f.key = std::move(key);
  for (const auto& v : test) {
    const std::size_t i = choose(v);
    if (i >= kAnswerCount) fail(ErrorCategory::kUsage, "predictor returned index out of range");
    ++f.label_counts[v.labels[i]];
    f.correct += i == v.correct;
    ++f.n;
  }
  return f;
}

inline EvalFragment evaluate(const Model& model, const std::vector<InstanceView>& test,
                             ReportKey key) {
  const std::size_t dim = model_dim(model);
  return evaluate([&](const InstanceView& v) { return predict(model, to_vectors(v, dim)).index; },
                  test, std::move(key));
}

inline double proportion(const EvalFragment& f, AnswerLabel l) {
  auto it = f.label_counts.find(l);
  const std::size_t c = it == f.label_counts.end() ? 0 : it->second;
  return static_cast<double>(c) / static_cast<double>(f.n);
}

// Fragments are put in a canonical order first so the floating-point sums
// do not depend on the order they were given in.
inline EvalReport aggregate(std::vector<EvalFragment> fragments) {
  if (fragments.empty()) fail(ErrorCategory::kUsage, "aggregate needs at least one fragment");
  for (const auto& f : fragments) {
    if (!(f.key == fragments.front().key))
      fail(ErrorCategory::kData, "cannot aggregate mismatched reports: " + describe(f.key) +
                                     " vs " + describe(fragments.front().key));
    if (f.n == 0) fail(ErrorCategory::kData, "fragment with no instances");
  }
  auto canon = [](const EvalFragment& f) {
    std::vector<std::size_t> counts;
    for (auto l : kAllLabels) {
      auto it = f.label_counts.find(l);
      counts.push_back(it == f.label_counts.end() ? 0 : it->second);
    }
    return std::tuple(f.f1(), f.n, counts);
  };
  std::sort(fragments.begin(), fragments.end(),
            [&](const auto& a, const auto& b) { return canon(a) < canon(b); });

  EvalReport r;
  r.key = fragments.front().key;
  r.n_runs = fragments.size();
  const double k = static_cast<double>(fragments.size());
  double sum = 0.0;
  for (const auto& f : fragments) {
    r.run_f1.push_back(f.f1());
    sum += f.f1();
  }
  r.f1_mean = sum / k;
  double var = 0.0;
  for (double x : r.run_f1) var += (x - r.f1_mean) * (x - r.f1_mean);
  r.f1_std = std::sqrt(var / k);
  for (auto l : kAllLabels) {
    double s = 0.0;
    bool seen = false;
    for (const auto& f : fragments) {
      s += proportion(f, l);
      seen = seen || f.label_counts.count(l);
    }
    if (seen || l == AnswerLabel::Correct) r.label_distribution[l] = s / k;
  }
  return r;
}

// ---------------------------------------------------------------------------
// comparison

struct ComparisonRow {
  Task task = Task::Agreement;
  LexType train_type = LexType::TypeI;
  LexType test_type = LexType::TypeI;
  double single_f1 = 0.0;
  double multi_f1 = 0.0;
  double delta = 0.0;  // multi - single
  std::map<AnswerLabel, double> label_delta;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
};

// Rows are matched on (task, train type, test type); regime names are
// free-form. Every report on one side needs a counterpart on the other.
inline ComparisonReport compare(const std::vector<EvalReport>& single,
                                const std::vector<EvalReport>& multi) {
  using Key = std::tuple<Task, LexType, LexType>;
  auto index = [](const std::vector<EvalReport>& rs, const char* side) {
    std::map<Key, const EvalReport*> m;
    for (const auto& r : rs)
      if (!m.emplace(Key{r.key.task, r.key.train_type, r.key.test_type}, &r).second)
        fail(ErrorCategory::kData, std::string("duplicate ") + side + " report " +
                                       describe(r.key));
    return m;
  };
  const auto s = index(single, "single"), m = index(multi, "multi");
  auto missing = [](const EvalReport& r, const char* side) {
    fail(ErrorCategory::kData, "no " + std::string(side) + " counterpart for " + describe(r.key));
  };
  for (const auto& [k, r] : s)
    if (!m.count(k)) missing(*r, "multi-task");
  for (const auto& [k, r] : m)
    if (!s.count(k)) missing(*r, "single-task");

  ComparisonReport out;
  for (const auto& [k, rs] : s) {
    const EvalReport& rm = *m.at(k);
    ComparisonRow row;
    std::tie(row.task, row.train_type, row.test_type) = k;
    row.single_f1 = rs->f1_mean;
    row.multi_f1 = rm.f1_mean;
    row.delta = rm.f1_mean - rs->f1_mean;
    for (auto l : kAllLabels) {
      const auto a = rs->label_distribution.find(l);
      const auto b = rm.label_distribution.find(l);
      if (a == rs->label_distribution.end() && b == rm.label_distribution.end()) continue;
      const double va = a == rs->label_distribution.end() ? 0.0 : a->second;
      const double vb = b == rm.label_distribution.end() ? 0.0 : b->second;
      row.label_delta[l] = vb - va;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// structured files and text tables

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [l, p] : r.label_distribution) labels[std::string(label_name(l))] = p;
  return {{"regime", r.key.regime},
          {"task", task_name(r.key.task)},
          {"train_type", lex_type_name(r.key.train_type)},
          {"test_type", lex_type_name(r.key.test_type)},
          {"f1_mean", r.f1_mean},
          {"f1_std", r.f1_std},
          {"n_runs", r.n_runs},
          {"run_f1", r.run_f1},
          {"label_distribution", labels}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  auto need = [](auto opt, const std::string& what) {
    if (!opt) fail(ErrorCategory::kFormat, "report: bad " + what);
    return *opt;
  };
  EvalReport r;
  try {
    r.key.regime = j.at("regime").get<std::string>();
    r.key.task = need(parse_task(j.at("task").get<std::string>()), "task");
    r.key.train_type = need(parse_lex_type(j.at("train_type").get<std::string>()), "train_type");
    r.key.test_type = need(parse_lex_type(j.at("test_type").get<std::string>()), "test_type");
    r.f1_mean = j.at("f1_mean").get<double>();
    r.f1_std = j.at("f1_std").get<double>();
    r.n_runs = j.at("n_runs").get<std::size_t>();
    r.run_f1 = j.value("run_f1", std::vector<double>{});
    for (const auto& [k, v] : j.at("label_distribution").items())
      r.label_distribution[need(parse_label(k), "label '" + k + "'")] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("report: ") + e.what());
  }
  return r;
}

inline void save_reports(const std::vector<EvalReport>& reports, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(report_to_json(r));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write report: " + path);
  out << j.dump(2) << '\n';
}

// Accepts a single report object or an array of them.
inline std::vector<EvalReport> load_reports(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kNotFound, "report not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, path + ": " + e.what());
  }
  std::vector<EvalReport> out;
  if (j.is_array())
    for (const auto& x : j) out.push_back(report_from_json(x));
  else
    out.push_back(report_from_json(j));
  return out;
}

inline nlohmann::json comparison_to_json(const ComparisonReport& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows) {
    nlohmann::json ld = nlohmann::json::object();
    for (const auto& [l, d] : r.label_delta) ld[std::string(label_name(l))] = d;
    rows.push_back({{"task", task_name(r.task)},
                    {"train_type", lex_type_name(r.train_type)},
                    {"test_type", lex_type_name(r.test_type)},
                    {"single_f1", r.single_f1},
                    {"multi_f1", r.multi_f1},
                    {"delta", r.delta},
                    {"label_delta", ld}});
  }
  return {{"rows", rows}};
}

inline std::string fixed3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

inline std::string render_reports(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "regime" << std::setw(11) << "task" << std::setw(7)
     << "train" << std::setw(6) << "test" << "F1 (std)        runs\n";
  for (const auto& r : reports)
    os << std::setw(12) << r.key.regime << std::setw(11) << task_name(r.key.task)
       << std::setw(7) << lex_type_name(r.key.train_type) << std::setw(6)
       << lex_type_name(r.key.test_type) << std::setw(16)
       << (fixed3(r.f1_mean) + " (" + fixed3(r.f1_std) + ")") << r.n_runs << '\n';
  return os.str();
}

inline std::string render_comparison(const ComparisonReport& c) {
  std::ostringstream os;
  os << std::left << std::setw(11) << "task" << std::setw(7) << "train" << std::setw(6)
     << "test" << std::setw(9) << "single" << std::setw(9) << "multi" << "delta\n";
  for (const auto& r : c.rows) {
    os << std::setw(11) << task_name(r.task) << std::setw(7) << lex_type_name(r.train_type)
       << std::setw(6) << lex_type_name(r.test_type) << std::setw(9) << fixed3(r.single_f1)
       << std::setw(9) << fixed3(r.multi_f1) << (r.delta >= 0 ? "+" : "") << fixed3(r.delta)
       << '\n';
    std::string labels;
    for (const auto& [l, d] : r.label_delta)
      if (l != AnswerLabel::Correct && d != 0.0)
        labels += "  " + std::string(label_name(l)) + " " + (d >= 0 ? "+" : "") + fixed3(d);
    if (!labels.empty()) os << "    label deltas:" << labels << '\n';
  }
  return os.str();
}

}  // namespace blm
