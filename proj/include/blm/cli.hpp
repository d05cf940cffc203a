#pragma once

// Command-line front end. run_cli() is the whole program; tools/blm.cpp
// only forwards main() to it.
//
// Failures print one line "error: <category>: <message>" on stderr and
// return a nonzero code (2 for usage errors, 1 otherwise).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blm/checkpoint.hpp"
#include "blm/data.hpp"
#include "blm/dataset_io.hpp"
#include "blm/embeddings.hpp"
#include "blm/error.hpp"
#include "blm/eval.hpp"
#include "blm/generator.hpp"
#include "blm/lexicon.hpp"
#include "blm/training.hpp"

namespace blm {

namespace cli_detail {

namespace fs = std::filesystem;

template <class T>
T parse_or_usage(std::optional<T> v, const std::string& flag, const std::string& value) {
  if (!v) fail(ErrorCategory::kUsage, "invalid value '" + value + "' for " + flag);
  return *v;
}

// Outputs must not overwrite inputs or each other.
inline void check_outputs(const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) {
  std::set<fs::path> seen;
  for (const auto& in : inputs) seen.insert(fs::weakly_canonical(in));
  for (const auto& out : outputs) {
    if (out.empty()) continue;
    if (!seen.insert(fs::weakly_canonical(out)).second)
      fail(ErrorCategory::kUsage, "output path collides with another input or output: " + out);
  }
}

inline void require_exists(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) fail(ErrorCategory::kNotFound, what + " not found: " + path);
}

inline std::vector<BlmInstance> load_all(const std::vector<std::string>& paths) {
  std::vector<BlmInstance> all;
  for (const auto& p : paths) {
    auto part = load_dataset(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

// "model.blmc" -> "model.seed8.blmc" when several runs share one path.
inline std::string run_path(const std::string& path, std::uint64_t seed, bool several) {
  if (!several) return path;
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + ".seed" + std::to_string(seed) +
                             p.extension().string()))
      .string();
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string task, lex_type, lexicon, out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

inline void cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const Task task = parse_or_usage(parse_task(a.task), "--task", a.task);
  const LexType type = parse_or_usage(parse_lex_type(a.lex_type), "--lex-type", a.lex_type);
  if (a.count < 1) fail(ErrorCategory::kUsage, "--count must be >= 1");
  check_outputs({a.lexicon}, {a.out});
  out << "generate task=" << task_name(task) << " lex_type=" << lex_type_name(type)
      << " count=" << a.count << " seed=" << a.seed << " lexicon=" << a.lexicon
      << " out=" << a.out << '\n';
  const Lexicon lex = load_lexicon(a.lexicon);
  const auto instances = generate(task, type, lex, a.count, a.seed);
  std::set<std::string> groups;
  for (const auto& i : instances) groups.insert(i.group_key);
  save_dataset(instances, a.out);
  out << "wrote " << instances.size() << " instances (" << groups.size() << " groups, "
      << sentence_inventory(instances).size() << " distinct sentences) to " << a.out << '\n';
}

struct SplitArgs {
  std::string in, train_out, dev_out, test_out, group_by = "auto";
  std::vector<double> ratios{90.0, 20.0, 10.0};
  std::uint64_t seed = 0;
};

inline void cmd_split(const SplitArgs& a, std::ostream& out) {
  if (a.ratios.size() != 3) fail(ErrorCategory::kUsage, "--ratios takes exactly three values");
  require_exists(a.in, "dataset");
  check_outputs({a.in}, {a.train_out, a.dev_out, a.test_out});
  const auto instances = load_dataset(a.in);
  if (instances.empty()) fail(ErrorCategory::kData, "dataset is empty: " + a.in);
  SplitSpec spec;
  spec.ratios = {a.ratios[0], a.ratios[1], a.ratios[2]};
  if (a.group_by == "auto")
    spec.group_field = default_group_field(instances.front().task);
  else if (a.group_by == "correct-answer")
    spec.group_field = GroupField::CorrectAnswer;
  else if (a.group_by == "verb-lemma")
    spec.group_field = GroupField::VerbLemma;
  else
    fail(ErrorCategory::kUsage, "invalid value '" + a.group_by + "' for --group-by");
  out << "split in=" << a.in << " seed=" << a.seed << " ratios=" << a.ratios[0] << ":"
      << a.ratios[1] << ":" << a.ratios[2] << " group_by="
      << (spec.group_field == GroupField::CorrectAnswer ? "correct-answer" : "verb-lemma")
      << '\n';
  const auto parts = split(instances, spec, a.seed);
  save_dataset(parts.train, a.train_out);
  save_dataset(parts.dev, a.dev_out);
  save_dataset(parts.test, a.test_out);
  out << "train=" << parts.train.size() << " dev=" << parts.dev.size()
      << " test=" << parts.test.size() << '\n';
}

struct EncodeArgs {
  std::vector<std::string> in;
  std::string out;
  std::size_t dim = kDefaultEmbeddingDim;
  std::uint64_t seed = 0;
  double noise = 0.1;
};

inline void cmd_inventory(const EncodeArgs& a, std::ostream& out) {
  for (const auto& p : a.in) require_exists(p, "dataset");
  check_outputs(a.in, {a.out});
  out << "inventory in=" << join(a.in) << " out=" << a.out << '\n';
  const auto records = sentence_inventory(load_all(a.in));
  save_inventory(records, a.out);
  out << "wrote " << records.size() << " sentences to " << a.out << '\n';
}

inline void cmd_encode(const EncodeArgs& a, bool oracle, std::ostream& out) {
  if (a.dim < 1) fail(ErrorCategory::kUsage, "--dim must be >= 1");
  if (oracle && a.dim < kOracleMinDim)
    fail(ErrorCategory::kUsage, "--dim must be >= " + std::to_string(kOracleMinDim) +
                                    " for the oracle encoder");
  if (oracle && !(a.noise >= 0.0)) fail(ErrorCategory::kUsage, "--noise must be >= 0");
  for (const auto& p : a.in) require_exists(p, "dataset");
  check_outputs(a.in, {a.out});
  out << (oracle ? "encode-oracle" : "encode-mock") << " in=" << join(a.in) << " dim=" << a.dim
      << " seed=" << a.seed;
  if (oracle) out << " noise=" << a.noise;
  out << " out=" << a.out << '\n';
  EmbeddingStore store(a.dim);
  for (const auto& r : sentence_inventory(load_all(a.in)))
    store.put(r.id, oracle ? oracle_encode(r, a.dim, a.noise, a.seed)
                           : mock_encode(r, a.dim, a.seed));
  store_write(store, a.out);
  out << "wrote " << store.size() << " vectors of dim " << a.dim << " to " << a.out << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config, checkpoint, log, resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, runs, threads;
};

struct TrainJob {
  TrainConfig cfg;
  std::map<Task, std::string> train_files, dev_files;
  std::string store;
  std::string checkpoint = "model.blmc";
  std::string log;
  std::size_t runs = 1;
};

// Config file: the training fields plus
//   "data":   {"train": {task: path}, "dev": {task: path}, "store": path}
//   "output": {"checkpoint": path, "log": path, "runs": n}
// Relative paths are taken from the config file's directory.
inline TrainJob load_train_job(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kNotFound, "config not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, path + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorCategory::kFormat, path + ": expected a JSON object");
  const fs::path base = fs::path(path).parent_path();
  auto resolve_path = [&](const std::string& p) {
    return fs::path(p).is_absolute() || base.empty() ? p : (base / p).string();
  };
  TrainJob job;
  try {
    nlohmann::json data = j.value("data", nlohmann::json::object());
    nlohmann::json output = j.value("output", nlohmann::json::object());
    j.erase("data");
    j.erase("output");
    job.cfg = config_from_json(j);
    for (const auto& [k, v] : data.items())
      if (k != "train" && k != "dev" && k != "store")
        fail(ErrorCategory::kFormat, "config: unknown key 'data." + k + "'");
    for (const auto& [k, v] : output.items())
      if (k != "checkpoint" && k != "log" && k != "runs")
        fail(ErrorCategory::kFormat, "config: unknown key 'output." + k + "'");
    auto files = [&](const char* key, std::map<Task, std::string>& dst) {
      if (!data.contains(key)) return;
      for (const auto& [k, v] : data[key].items()) {
        auto t = parse_task(k);
        if (!t) fail(ErrorCategory::kFormat, "config: unknown task '" + k + "' in data." + key);
        dst[*t] = resolve_path(v.get<std::string>());
      }
    };
    files("train", job.train_files);
    files("dev", job.dev_files);
    if (data.contains("store")) job.store = resolve_path(data["store"].get<std::string>());
    if (output.contains("checkpoint"))
      job.checkpoint = resolve_path(output["checkpoint"].get<std::string>());
    if (output.contains("log")) job.log = resolve_path(output["log"].get<std::string>());
    job.runs = output.value("runs", std::size_t{1});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, path + ": " + e.what());
  }
  return job;
}

inline TrainingData load_views(const std::map<Task, std::string>& files,
                               const EmbeddingStore& store,
                               std::vector<std::vector<BlmInstance>>& keep) {
  TrainingData out;
  for (const auto& [task, path] : files) {
    keep.push_back(load_dataset(path));
    for (const auto& inst : keep.back())
      if (inst.task != task)
        fail(ErrorCategory::kData, path + ": expected " + std::string(task_name(task)) +
                                       " instances, found " + std::string(task_name(inst.task)));
    out[task] = resolve(keep.back(), store);
  }
  return out;
}

inline void cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainJob job = load_train_job(a.config);
  if (a.seed) job.cfg.seed = *a.seed;
  if (a.epochs) job.cfg.epochs = *a.epochs;
  if (a.runs) job.runs = *a.runs;
  if (!a.checkpoint.empty()) job.checkpoint = a.checkpoint;
  if (!a.log.empty()) job.log = a.log;
  validate_config(job.cfg);
  if (job.runs < 1) fail(ErrorCategory::kUsage, "runs must be >= 1");
  if (!a.resume.empty() && job.runs != 1)
    fail(ErrorCategory::kUsage, "--resume continues a single run; set runs to 1");
  if (job.store.empty()) fail(ErrorCategory::kUsage, "config: data.store is required");
  for (Task t : job.cfg.tasks)
    if (!job.train_files.count(t))
      fail(ErrorCategory::kUsage,
           "config: data.train has no file for task " + std::string(task_name(t)));
  std::vector<std::string> inputs{a.config, job.store};
  for (const auto& [t, p] : job.train_files) inputs.push_back(p);
  for (const auto& [t, p] : job.dev_files) inputs.push_back(p);
  if (!a.resume.empty()) inputs.push_back(a.resume);
  std::vector<std::string> outputs{job.log};
  for (std::size_t i = 0; i < job.runs; ++i)
    outputs.push_back(run_path(job.checkpoint, job.cfg.seed + i, job.runs > 1));
  check_outputs(inputs, outputs);
  for (const auto& p : inputs) require_exists(p, p == job.store ? "store" : "input");

  nlohmann::json resolved = config_to_json(job.cfg);
  resolved["runs"] = job.runs;
  resolved["seeds"] = nlohmann::json::array();
  for (std::size_t i = 0; i < job.runs; ++i) resolved["seeds"].push_back(job.cfg.seed + i);
  resolved["store"] = job.store;
  resolved["checkpoint"] = job.checkpoint;
  out << "train config " << resolved.dump() << '\n';

  const EmbeddingStore store = store_read(job.store);
  std::vector<std::vector<BlmInstance>> keep;
  const TrainingData train_views = load_views(job.train_files, store, keep);
  const TrainingData dev_views = load_views(job.dev_files, store, keep);
  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) resume = load_checkpoint(a.resume);

  std::ofstream log;
  if (!job.log.empty()) {
    log.open(job.log, std::ios::binary | std::ios::trunc);
    if (!log) fail(ErrorCategory::kIo, "cannot write log: " + job.log);
  }
  TrainOptions opt;
  opt.threads = a.threads.value_or(0);
  if (!dev_views.empty()) opt.dev = &dev_views;

  for (std::size_t i = 0; i < job.runs; ++i) {
    TrainConfig cfg = job.cfg;
    cfg.seed = job.cfg.seed + i;
    auto on_epoch = [&](const EpochStats& e) {
      out << "seed " << cfg.seed << " epoch " << e.epoch << "/" << cfg.epochs << " loss "
          << e.total << " (sentence " << e.sentence << ", task " << e.task << ")";
      if (e.dev_accuracy) out << " dev " << *e.dev_accuracy;
      out << '\n';
      if (log) log << epoch_to_json(cfg.seed, e).dump() << '\n' << std::flush;
    };
    auto result = train(cfg, train_views, store.dim(), opt, resume ? &*resume : nullptr,
                        on_epoch);
    result.record.checkpoint_path = run_path(job.checkpoint, cfg.seed, job.runs > 1);
    save_checkpoint(result.checkpoint, result.record.checkpoint_path);
    if (log) log << run_to_json(result.record).dump() << '\n' << std::flush;
    out << "seed " << cfg.seed << " checkpoint " << result.record.checkpoint_path << " sha="
        << hex64(fnv1a64(serialize_checkpoint(result.checkpoint))) << '\n';
  }
}

// ---------------------------------------------------------------------------
// eval and report

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string test, store, regime, test_type, out;
};

inline std::string default_regime_label(const nlohmann::json& config) {
  const std::string r = config.value("regime", "single");
  if (r == "baseline") return "baseline-" + config.value("baseline", "ffnn");
  return r;
}

inline void cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<std::string> inputs = a.checkpoints;
  inputs.push_back(a.test);
  inputs.push_back(a.store);
  check_outputs(inputs, {a.out});
  std::optional<LexType> test_type;
  if (!a.test_type.empty())
    test_type = parse_or_usage(parse_lex_type(a.test_type), "--test-type", a.test_type);
  require_exists(a.test, "test set");
  require_exists(a.store, "store");
  for (const auto& c : a.checkpoints) require_exists(c, "checkpoint");
  out << "eval checkpoints=" << join(a.checkpoints) << " test=" << a.test << " store=" << a.store
      << '\n';

  const auto test = load_dataset(a.test);
  if (test.empty()) fail(ErrorCategory::kData, "empty test set: " + a.test);
  for (const auto& inst : test) {
    if (inst.task != test.front().task)
      fail(ErrorCategory::kData, a.test + ": test set mixes tasks");
    if (!test_type && inst.lex_type != test.front().lex_type)
      fail(ErrorCategory::kData, a.test + ": test set mixes lexicalisation types; pass --test-type");
  }
  const EmbeddingStore store = store_read(a.store);
  const auto views = resolve(test, store);
  std::vector<EvalFragment> fragments;
  for (const auto& path : a.checkpoints) {
    const Checkpoint ck = load_checkpoint(path);
    if (model_dim(ck.model) != store.dim())
      fail(ErrorCategory::kShape, path + ": model dim " + std::to_string(model_dim(ck.model)) +
                                      " does not match store dim " + std::to_string(store.dim()));
    ReportKey key;
    key.regime = a.regime.empty() ? default_regime_label(ck.config) : a.regime;
    key.task = test.front().task;
    key.train_type = parse_lex_type(ck.config.value("train_type", "I")).value_or(LexType::TypeI);
    key.test_type = test_type.value_or(test.front().lex_type);
    fragments.push_back(evaluate(ck.model, views, key));
    out << "seed " << ck.seed << " f1 " << fragments.back().f1() << '\n';
  }
  const EvalReport report = aggregate(fragments);
  out << render_reports({report});
  if (!a.out.empty()) save_reports({report}, a.out);
}

struct ReportArgs {
  std::vector<std::string> single, multi, reports;
  std::string out;
};

inline void cmd_report(const ReportArgs& a, std::ostream& out) {
  if (a.reports.empty() && (a.single.empty() || a.multi.empty()))
    fail(ErrorCategory::kUsage, "report needs --single and --multi, or --reports");
  std::vector<std::string> inputs = a.single;
  inputs.insert(inputs.end(), a.multi.begin(), a.multi.end());
  inputs.insert(inputs.end(), a.reports.begin(), a.reports.end());
  check_outputs(inputs, {a.out});
  out << "report single=" << join(a.single) << " multi=" << join(a.multi)
      << " reports=" << join(a.reports) << '\n';
  auto load = [](const std::vector<std::string>& paths) {
    std::vector<EvalReport> all;
    for (const auto& p : paths) {
      auto r = load_reports(p);
      all.insert(all.end(), r.begin(), r.end());
    }
    return all;
  };
  if (!a.reports.empty()) out << render_reports(load(a.reports));
  if (!a.single.empty() && !a.multi.empty()) {
    const auto cmp = compare(load(a.single), load(a.multi));
    out << render_comparison(cmp);
    if (!a.out.empty()) {
      std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
      if (!f) fail(ErrorCategory::kIo, "cannot write report: " + a.out);
      f << comparison_to_json(cmp).dump(2) << '\n';
    }
  }
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Blackbird Language Matrices: data generation, training and evaluation", "blm"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate BLM instances from a lexicon");
  g->add_option("--task", gen.task, "agreement (agr), caus or od")->required();
  g->add_option("--lex-type", gen.lex_type, "lexicalisation type: I, II or III")->required();
  g->add_option("--count", gen.count, "number of instances")->required();
  g->add_option("--seed", gen.seed, "generation seed")->required();
  g->add_option("--lexicon", gen.lexicon, "lexicon file")->required();
  g->add_option("--out", gen.out, "output dataset (JSON lines)")->required();

  SplitArgs sp;
  auto* s = app.add_subcommand("split", "Group-disjoint train/dev/test split");
  s->add_option("--in", sp.in, "input dataset")->required();
  s->add_option("--seed", sp.seed, "split seed")->required();
  s->add_option("--ratios", sp.ratios, "train dev test weights")
      ->expected(3)->delimiter(',')->capture_default_str();
  s->add_option("--group-by", sp.group_by, "auto, correct-answer or verb-lemma")
      ->capture_default_str();
  s->add_option("--train-out", sp.train_out, "train output")->required();
  s->add_option("--dev-out", sp.dev_out, "dev output")->required();
  s->add_option("--test-out", sp.test_out, "test output")->required();

  EncodeArgs inv;
  auto* iv = app.add_subcommand("inventory", "List distinct sentences for an external encoder");
  iv->add_option("--in", inv.in, "input dataset(s)")->required();
  iv->add_option("--out", inv.out, "output inventory (JSON lines of id, text)")->required();

  EncodeArgs mock;
  auto* em = app.add_subcommand("encode-mock", "Random unit-vector embedding store");
  em->add_option("--in", mock.in, "input dataset(s)")->required();
  em->add_option("--dim", mock.dim, "embedding dimension")->capture_default_str();
  em->add_option("--seed", mock.seed, "encoder seed")->required();
  em->add_option("--out", mock.out, "output store")->required();

  EncodeArgs orc;
  orc.dim = 128;
  auto* eo = app.add_subcommand("encode-oracle", "Structure-revealing embedding store");
  eo->add_option("--in", orc.in, "input dataset(s)")->required();
  eo->add_option("--dim", orc.dim, "embedding dimension")->capture_default_str();
  eo->add_option("--noise", orc.noise, "Gaussian noise scale")->capture_default_str();
  eo->add_option("--seed", orc.seed, "encoder seed")->required();
  eo->add_option("--out", orc.out, "output store")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train models from a JSON config");
  t->add_option("--config", tr.config, "training config (JSON)")->required();
  t->add_option("--seed", tr.seed, "override the base seed");
  t->add_option("--epochs", tr.epochs, "override the epoch count");
  t->add_option("--runs", tr.runs, "override the number of runs");
  t->add_option("--checkpoint", tr.checkpoint, "override the checkpoint path");
  t->add_option("--log", tr.log, "override the JSON-lines log path");
  t->add_option("--resume", tr.resume, "continue from this checkpoint");
  t->add_option("--threads", tr.threads, "worker threads (default: BLM_THREADS or all cores)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score checkpoints on a test set");
  e->add_option("--checkpoint", ev.checkpoints, "checkpoint(s); several are aggregated as runs")
      ->required();
  e->add_option("--test", ev.test, "test dataset")->required();
  e->add_option("--store", ev.store, "embedding store")->required();
  e->add_option("--regime", ev.regime, "report label (default: from the checkpoint)");
  e->add_option("--test-type", ev.test_type, "test lexicalisation type (default: from data)");
  e->add_option("--out", ev.out, "report file (JSON)");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Render reports and single/multi comparisons");
  r->add_option("--single", rp.single, "single-task report file(s)");
  r->add_option("--multi", rp.multi, "multi-task report file(s)");
  r->add_option("--reports", rp.reports, "report file(s) to tabulate");
  r->add_option("--out", rp.out, "comparison output (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: usage: " << ex.what() << '\n';
    return 2;
  }

  try {
    if (g->parsed()) cmd_generate(gen, out);
    else if (s->parsed()) cmd_split(sp, out);
    else if (iv->parsed()) cmd_inventory(inv, out);
    else if (em->parsed()) cmd_encode(mock, false, out);
    else if (eo->parsed()) cmd_encode(orc, true, out);
    else if (t->parsed()) cmd_train(tr, out);
    else if (e->parsed()) cmd_eval(ev, out);
    else if (r->parsed()) cmd_report(rp, out);
  } catch (const Error& ex) {
    err << "error: " << category_name(ex.category()) << ": " << ex.what() << '\n';
    return ex.category() == ErrorCategory::kUsage ? 2 : 1;
  } catch (const std::exception& ex) {
    err << "error: io: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace blm
