#pragma once

// Training loops for the single-task, multi-task and baseline regimes.
//
// Every random draw derives from the run seed: parameter init, training
// subset sampling, the epoch shuffles (one generator whose state goes into
// checkpoints) and the per-instance latent noise (stateless, keyed by
// epoch/batch/position). Batch gradients are accumulated in a fixed number
// of shards and summed in shard order, so the thread count never changes
// the arithmetic.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "blm/checkpoint.hpp"
#include "blm/data.hpp"
#include "blm/embeddings.hpp"
#include "blm/error.hpp"
#include "blm/model.hpp"
#include "blm/nn.hpp"
#include "blm/random.hpp"

namespace blm {

enum class Regime { SingleTask, MultiTask, Baseline };
enum class BaselineKind { Ffnn, Cnn };

inline std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::SingleTask: return "single";
    case Regime::MultiTask: return "multi";
    case Regime::Baseline: return "baseline";
  }
  return "?";
}

inline std::optional<Regime> parse_regime(std::string_view s) {
  if (s == "single") return Regime::SingleTask;
  if (s == "multi") return Regime::MultiTask;
  if (s == "baseline") return Regime::Baseline;
  return std::nullopt;
}

inline std::string_view baseline_name(BaselineKind b) {
  return b == BaselineKind::Ffnn ? "ffnn" : "cnn";
}

inline std::optional<BaselineKind> parse_baseline(std::string_view s) {
  if (s == "ffnn") return BaselineKind::Ffnn;
  if (s == "cnn") return BaselineKind::Cnn;
  return std::nullopt;
}

struct TrainConfig {
  Regime regime = Regime::SingleTask;
  std::vector<Task> tasks{Task::Agreement};
  BaselineKind baseline = BaselineKind::Ffnn;
  double lr = 1e-3;
  std::size_t batch_size = 100;
  std::size_t epochs = 120;
  std::map<Task, std::size_t> train_counts;  // absent task: use every instance
  std::uint64_t seed = 1;
  double kl_weight = 1.0;
  NegativesPolicy negatives = NegativesPolicy::AnswerDistractor;
  std::size_t sentence_hidden = 128;
  std::size_t sentence_latent = 5;
  std::size_t task_hidden = 64;
  std::size_t task_latent = 16;
  std::size_t cnn_channels = 16;
  LexType train_type = LexType::TypeI;

  TwoLevelDims dims(std::size_t dim) const {
    return {dim, sentence_hidden, sentence_latent, task_hidden, task_latent};
  }
};

inline void validate_config(const TrainConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorCategory::kUsage, "config: " + m); };
  if (c.tasks.empty()) bad("tasks must be non-empty");
  for (std::size_t i = 1; i < c.tasks.size(); ++i)
    if (c.tasks[i] <= c.tasks[i - 1]) bad("tasks must be distinct (listed once each)");
  if (c.regime != Regime::MultiTask && c.tasks.size() != 1)
    bad(std::string(regime_name(c.regime)) + " regime takes exactly one task");
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (c.epochs < 1) bad("epochs must be >= 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) bad("lr must be positive");
  if (!(c.kl_weight >= 0.0) || !std::isfinite(c.kl_weight)) bad("kl_weight must be >= 0");
  if (c.sentence_hidden < 1 || c.sentence_latent < 1 || c.task_hidden < 1 || c.task_latent < 1 ||
      c.cnn_channels < 1)
    bad("layer sizes must be >= 1");
  for (const auto& [t, n] : c.train_counts)
    if (std::find(c.tasks.begin(), c.tasks.end(), t) == c.tasks.end())
      bad("train_counts names task '" + std::string(task_name(t)) + "' which is not trained");
}

// Full-scale training-set sizes.
inline std::size_t full_scale_train_count(Regime regime, Task task, LexType type) {
  if (regime == Regime::MultiTask) return 1000;
  if (task != Task::Agreement) return 2160;
  return type == LexType::TypeI ? 2052 : 3000;
}

inline void apply_full_preset(TrainConfig& c) {
  c.lr = 1e-3;
  c.batch_size = 100;
  c.epochs = 120;
  for (Task t : c.tasks) c.train_counts[t] = full_scale_train_count(c.regime, t, c.train_type);
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (Task t : c.tasks) tasks.push_back(task_name(t));
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [t, n] : c.train_counts) counts[std::string(task_name(t))] = n;
  return {{"regime", regime_name(c.regime)},
          {"tasks", tasks},
          {"baseline", baseline_name(c.baseline)},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"train_counts", counts},
          {"seed", c.seed},
          {"kl_weight", c.kl_weight},
          {"negatives", negatives_policy_name(c.negatives)},
          {"sentence_hidden", c.sentence_hidden},
          {"sentence_latent", c.sentence_latent},
          {"task_hidden", c.task_hidden},
          {"task_latent", c.task_latent},
          {"cnn_channels", c.cnn_channels},
          {"train_type", lex_type_name(c.train_type)}};
}

// Unknown keys are rejected. "preset": "full" fills lr, batch size,
// epochs and the full-scale training-set sizes before the explicit fields
// are applied.
inline TrainConfig config_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& m) -> void { fail(ErrorCategory::kFormat, "config: " + m); };
  if (!j.is_object()) bad("expected a JSON object");
  static const std::vector<std::string> kKeys = {
      "regime", "tasks", "baseline", "lr", "batch_size", "epochs", "train_counts", "seed",
      "kl_weight", "negatives", "sentence_hidden", "sentence_latent", "task_hidden",
      "task_latent", "cnn_channels", "train_type", "preset"};
  for (const auto& [k, v] : j.items())
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) bad("unknown key '" + k + "'");

  TrainConfig c;
  try {
    if (j.contains("regime")) {
      auto r = parse_regime(j["regime"].get<std::string>());
      if (!r) bad("regime must be single, multi or baseline");
      c.regime = *r;
    }
    if (j.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : j["tasks"]) {
        auto p = parse_task(t.get<std::string>());
        if (!p) bad("unknown task " + t.dump());
        c.tasks.push_back(*p);
      }
      std::sort(c.tasks.begin(), c.tasks.end());
    }
    if (j.contains("baseline")) {
      auto b = parse_baseline(j["baseline"].get<std::string>());
      if (!b) bad("baseline must be ffnn or cnn");
      c.baseline = *b;
    }
    if (j.contains("train_type")) {
      auto t = parse_lex_type(j["train_type"].get<std::string>());
      if (!t) bad("train_type must be I, II or III");
      c.train_type = *t;
    }
    if (j.contains("preset")) {
      if (j["preset"].get<std::string>() != "full") bad("the only preset is \"full\"");
      apply_full_preset(c);
    }
    auto get = [&](const char* k, auto& field) {
      if (j.contains(k)) field = j[k].get<std::decay_t<decltype(field)>>();
    };
    get("lr", c.lr);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("kl_weight", c.kl_weight);
    get("sentence_hidden", c.sentence_hidden);
    get("sentence_latent", c.sentence_latent);
    get("task_hidden", c.task_hidden);
    get("task_latent", c.task_latent);
    get("cnn_channels", c.cnn_channels);
    if (j.contains("negatives")) {
      auto n = parse_negatives_policy(j["negatives"].get<std::string>());
      if (!n) bad("negatives must be answer-distractor, duplicate-context or context-only");
      c.negatives = *n;
    }
    if (j.contains("train_counts")) {
      for (const auto& [k, v] : j["train_counts"].items()) {
        auto t = parse_task(k);
        if (!t) bad("unknown task '" + k + "' in train_counts");
        c.train_counts[*t] = v.get<std::size_t>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("wrong value type: ") + e.what());
  }
  validate_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// data selection and batching

// Uniform sample without replacement, returned in original order.
template <class T>
std::vector<T> sample_training_set(const std::vector<T>& items, std::size_t count,
                                   std::uint64_t seed) {
  if (count > items.size())
    fail(ErrorCategory::kData, "requested " + std::to_string(count) +
                                   " training instances but only " +
                                   std::to_string(items.size()) + " are available");
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed({seed, 0x5a4d91eULL}));
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  out.reserve(count);
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

using TrainingData = std::map<Task, std::vector<InstanceView>>;

struct Batch {
  Task task = Task::Agreement;
  std::vector<std::size_t> items;  // indices into that task's training list
};

// Task-homogeneous batches: instances are shuffled within each task, cut
// into batches (the last one may be partial), and the pooled batch list is
// shuffled.
inline std::vector<Batch> plan_epoch(const std::map<Task, std::size_t>& sizes,
                                     std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) fail(ErrorCategory::kUsage, "batch size must be >= 1");
  std::vector<Batch> pool;
  for (const auto& [task, n] : sizes) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_in_place(order, rng);
    for (std::size_t start = 0; start < n; start += batch_size) {
      Batch b;
      b.task = task;
      b.items.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
      pool.push_back(std::move(b));
    }
  }
  shuffle_in_place(pool, rng);
  return pool;
}

// Picks each task's training subset according to the config.
inline TrainingData select_training_data(const TrainConfig& cfg, const TrainingData& available) {
  TrainingData out;
  for (Task t : cfg.tasks) {
    auto it = available.find(t);
    if (it == available.end() || it->second.empty())
      fail(ErrorCategory::kData,
           "no training instances for configured task " + std::string(task_name(t)));
    auto count = cfg.train_counts.find(t);
    out[t] = count == cfg.train_counts.end()
                 ? it->second
                 : sample_training_set(it->second, count->second,
                                       mix_seed({cfg.seed, static_cast<std::uint64_t>(t)}));
  }
  return out;
}

inline Model initial_model(const TrainConfig& cfg, std::size_t dim) {
  Rng rng(mix_seed({cfg.seed, 0x1417ULL}));
  switch (cfg.regime) {
    case Regime::SingleTask:
    case Regime::MultiTask:
      return TwoLevelModel::create(cfg.dims(dim), cfg.tasks, rng);
    case Regime::Baseline:
      if (cfg.baseline == BaselineKind::Ffnn) return BaselineFfnn::create(dim, rng);
      return BaselineCnn::create(dim, cfg.cnn_channels, rng);
  }
  fail(ErrorCategory::kUsage, "unknown regime");
}

// BLM_THREADS, else the hardware concurrency.
inline std::size_t default_threads() {
  if (const char* env = std::getenv("BLM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// trainer

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  std::size_t batches = 0;
  double sentence = 0.0;  // per-instance means
  double task = 0.0;
  double total = 0.0;
  std::optional<double> dev_accuracy;
};

struct TrainOptions {
  std::size_t threads = 0;  // 0: default_threads()
  const TrainingData* dev = nullptr;
};

inline constexpr std::size_t kTwoLevelGradShards = 4;

class Trainer {
 public:
  // `train` views point into an embedding store that must outlive the
  // trainer; it should already be the selected subset.
  Trainer(TrainConfig cfg, TrainingData train, std::size_t dim, TrainOptions opt = {})
      : cfg_(std::move(cfg)), train_(std::move(train)), dim_(dim), opt_(opt),
        model_(initial_model(cfg_, dim)),
        shuffle_rng_(mix_seed({cfg_.seed, 0xe90cULL})) {
    validate_config(cfg_);
    check_data();
    init_optimizers();
    init_grads();
  }

  // Continues from a checkpoint made with the same config (epochs may
  // differ) and the same training data.
  static Trainer resume(const Checkpoint& ck, TrainConfig cfg, TrainingData train,
                        TrainOptions opt = {}) {
    auto strip = [](nlohmann::json j) {
      j.erase("epochs");
      return j;
    };
    const auto mine = strip(config_to_json(cfg));
    const auto theirs = strip(ck.config);
    if (mine != theirs) {
      std::string field = "?";
      for (const auto& [k, v] : mine.items())
        if (!theirs.contains(k) || theirs[k] != v) {
          field = k;
          break;
        }
      fail(ErrorCategory::kUsage, "checkpoint was made with a different config (field '" +
                                      field + "')");
    }
    if (ck.seed != cfg.seed) fail(ErrorCategory::kUsage, "checkpoint seed differs from config");
    Trainer t(std::move(cfg), std::move(train), model_dim(ck.model), opt);
    if (architecture(ck.model) != architecture(t.model_))
      fail(ErrorCategory::kUsage, "checkpoint architecture does not match the config");
    t.model_ = ck.model;
    t.epochs_done_ = ck.epochs_done;
    t.shuffle_rng_ = rng_from_state(ck.rng_state);
    for (const auto& [name, st] : ck.optimizers) {
      auto it = t.optimizers_.find(name);
      if (it == t.optimizers_.end())
        fail(ErrorCategory::kFormat, "checkpoint has unexpected optimizer group '" + name + "'");
      it->second = st;
    }
    return t;
  }

  const TrainConfig& config() const { return cfg_; }
  const Model& model() const { return model_; }
  std::size_t epochs_done() const { return epochs_done_; }
  const std::map<std::string, nn::AdamState>& optimizers() const { return optimizers_; }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.model = model_;
    c.config = config_to_json(cfg_);
    c.seed = cfg_.seed;
    c.epochs_done = epochs_done_;
    c.rng_state = rng_state(shuffle_rng_);
    c.optimizers = optimizers_;
    return c;
  }

  std::map<Task, std::size_t> sizes() const {
    std::map<Task, std::size_t> s;
    for (const auto& [t, v] : train_) s[t] = v.size();
    return s;
  }

  EpochStats run_epoch() {
    const std::size_t epoch = epochs_done_ + 1;
    const auto plan = plan_epoch(sizes(), cfg_.batch_size, shuffle_rng_);
    EpochStats st;
    st.epoch = epoch;
    st.batches = plan.size();
    std::size_t n = 0;
    for (std::size_t b = 0; b < plan.size(); ++b) {
      const auto loss = train_batch(plan[b], epoch, b);
      st.sentence += loss.sentence;
      st.task += loss.task;
      n += plan[b].items.size();
    }
    st.sentence /= static_cast<double>(n);
    st.task /= static_cast<double>(n);
    st.total = st.sentence + st.task;
    if (opt_.dev) st.dev_accuracy = accuracy(*opt_.dev);
    epochs_done_ = epoch;
    return st;
  }

  struct BatchLoss {
    double sentence = 0.0;  // summed over the batch
    double task = 0.0;
  };

  // One gradient step on one task-homogeneous batch. The loss is the batch
  // mean; only the shared level and the batch's own head are updated.
  BatchLoss train_batch(const Batch& batch, std::size_t epoch, std::size_t batch_index) {
    const auto& views = train_.at(batch.task);
    const std::size_t B = batch.items.size();
    if (B == 0) fail(ErrorCategory::kUsage, "empty batch");
    const double scale = 1.0 / static_cast<double>(B);
    const std::size_t shards = grads_.size();
    std::vector<BatchLoss> shard_loss(shards);

    auto run_shard = [&](std::size_t s) {
      Model& grad = grads_[s];
      zero_group_grads(grad, batch.task);
      const std::size_t lo = s * B / shards, hi = (s + 1) * B / shards;
      for (std::size_t pos = lo; pos < hi; ++pos) {
        const InstanceVectors iv = to_vectors(views.at(batch.items[pos]), dim_);
        std::visit(
            [&](const auto& m) {
              using T = std::decay_t<decltype(m)>;
              auto& g = std::get<T>(grad);
              if constexpr (std::is_same_v<T, TwoLevelModel>) {
                Rng rng(mix_seed({cfg_.seed, epoch, batch_index, pos}));
                const auto noise = InstanceNoise::draw(m.dims, rng);
                const auto l = instance_loss(m, iv, noise, cfg_.kl_weight, cfg_.negatives, &g,
                                             scale);
                shard_loss[s].sentence += l.sentence;
                shard_loss[s].task += l.task;
              } else {
                const auto t = baseline_forward(m, iv.context);
                std::vector<Vec> others;
                for (std::size_t a = 0; a < kAnswerCount; ++a)
                  if (a != iv.correct) others.push_back(iv.answers[a]);
                Vec dpred(dim_, 0.0);
                shard_loss[s].task +=
                    baseline_loss(t.out, iv.answers[iv.correct], others, dpred, scale);
                baseline_backward(m, t, dpred, g);
              }
            },
            model_);
      }
    };

    const std::size_t workers =
        std::min(shards, opt_.threads ? opt_.threads : default_threads());
    if (workers <= 1) {
      for (std::size_t s = 0; s < shards; ++s) run_shard(s);
    } else {
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t s = w; s < shards; s += workers) run_shard(s);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    BatchLoss total;
    for (const auto& l : shard_loss) {
      total.sentence += l.sentence;
      total.task += l.task;
    }
    const std::string where = "epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(batch_index) + " (task " +
                              std::string(task_name(batch.task)) + ")";
    if (!std::isfinite(total.sentence) || !std::isfinite(total.task))
      fail(ErrorCategory::kNumeric, "non-finite loss at " + where);
    apply_update(batch.task, where);
    return total;
  }

  double accuracy(const TrainingData& data) const {
    std::size_t correct = 0, n = 0;
    for (const auto& [t, views] : data)
      for (const auto& v : views) {
        correct += predict(model_, to_vectors(v, dim_)).index == v.correct;
        ++n;
      }
    return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  }

 private:
  void check_data() const {
    for (Task t : cfg_.tasks) {
      auto it = train_.find(t);
      if (it == train_.end() || it->second.empty())
        fail(ErrorCategory::kData,
             "no training instances for configured task " + std::string(task_name(t)));
      for (const auto& v : it->second)
        if (v.task != t)
          fail(ErrorCategory::kData, "training list for " + std::string(task_name(t)) +
                                         " contains a " + std::string(task_name(v.task)) +
                                         " instance");
    }
    for (const auto& [t, v] : train_)
      if (std::find(cfg_.tasks.begin(), cfg_.tasks.end(), t) == cfg_.tasks.end())
        fail(ErrorCategory::kData,
             "training data given for unconfigured task " + std::string(task_name(t)));
  }

  // Optimizer groups: "shared" and "head:<task>" for the two-level model,
  // "ffnn" or "cnn" for a baseline.
  void init_optimizers() {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, TwoLevelModel>) {
            optimizers_["shared"] = nn::AdamState::for_params(nn::tensors_of(m.shared), cfg_.lr);
            for (const auto& [t, h] : m.heads)
              optimizers_["head:" + std::string(task_name(t))] =
                  nn::AdamState::for_params(nn::tensors_of(h), cfg_.lr);
          } else if constexpr (std::is_same_v<T, BaselineFfnn>) {
            optimizers_["ffnn"] = nn::AdamState::for_params(nn::tensors_of(m), cfg_.lr);
          } else {
            optimizers_["cnn"] = nn::AdamState::for_params(nn::tensors_of(m), cfg_.lr);
          }
        },
        model_);
  }

  // The two-level model uses fixed shards; the baselines are large enough
  // that one accumulation buffer is kept.
  void init_grads() {
    const std::size_t shards =
        std::holds_alternative<TwoLevelModel>(model_) ? kTwoLevelGradShards : 1;
    grads_.clear();
    for (std::size_t s = 0; s < shards; ++s)
      grads_.push_back(std::visit([](const auto& m) -> Model { return nn::zeros_like(m); },
                                  model_));
  }

  static void zero_group_grads(Model& grad, Task task) {
    std::visit(
        [&](auto& g) {
          using T = std::decay_t<decltype(g)>;
          auto zero = [](nn::Tensor& t) { t.fill(0.0); };
          if constexpr (std::is_same_v<T, TwoLevelModel>) {
            nn::for_each_tensor(g.shared, zero);
            nn::for_each_tensor(g.heads.at(task), zero);
          } else {
            nn::for_each_tensor(g, zero);
          }
        },
        grad);
  }

  template <class M>
  static void sum_into_first(std::vector<M*> parts, const std::string& where) {
    for (std::size_t s = 1; s < parts.size(); ++s) nn::add_into(*parts[0], *parts[s]);
    nn::for_each_tensor(*parts[0], [&](const nn::Tensor& t) {
      for (double v : t.values())
        if (!std::isfinite(v)) fail(ErrorCategory::kNumeric, "non-finite gradient at " + where);
    });
  }

  template <class M>
  void step(const std::string& group, M& params, const M& grad) {
    auto p = nn::tensors_of(params);
    auto g = nn::tensors_of(grad);
    nn::adam_step(p, g, optimizers_.at(group));
  }

  void apply_update(Task task, const std::string& where) {
    std::visit(
        [&](auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, TwoLevelModel>) {
            std::vector<VaeBlock*> shared, head;
            for (auto& g : grads_) {
              shared.push_back(&std::get<T>(g).shared);
              head.push_back(&std::get<T>(g).heads.at(task));
            }
            sum_into_first(shared, where);
            sum_into_first(head, where);
            step("shared", m.shared, *shared[0]);
            step("head:" + std::string(task_name(task)), m.heads.at(task), *head[0]);
          } else {
            std::vector<T*> parts;
            for (auto& g : grads_) parts.push_back(&std::get<T>(g));
            sum_into_first(parts, where);
            step(std::is_same_v<T, BaselineFfnn> ? "ffnn" : "cnn", m, *parts[0]);
          }
        },
        model_);
  }

  TrainConfig cfg_;
  TrainingData train_;
  std::size_t dim_;
  TrainOptions opt_;
  Model model_;
  Rng shuffle_rng_;
  std::size_t epochs_done_ = 0;
  std::map<std::string, nn::AdamState> optimizers_;
  std::vector<Model> grads_;
};

// ---------------------------------------------------------------------------
// runs

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpochStats> epochs;
  std::string checkpoint_path;
  double wall_seconds = 0.0;
};

inline nlohmann::json epoch_to_json(std::uint64_t seed, const EpochStats& e) {
  nlohmann::json j = {{"event", "epoch"},      {"seed", seed},       {"epoch", e.epoch},
                      {"batches", e.batches},  {"sentence", e.sentence},
                      {"task", e.task},        {"total", e.total}};
  if (e.dev_accuracy) j["dev_accuracy"] = *e.dev_accuracy;
  return j;
}

inline nlohmann::json run_to_json(const RunRecord& r) {
  return {{"event", "run"},
          {"seed", r.seed},
          {"epochs", r.epochs.size()},
          {"final_total", r.epochs.empty() ? 0.0 : r.epochs.back().total},
          {"checkpoint", r.checkpoint_path},
          {"wall_seconds", r.wall_seconds}};
}

struct TrainResult {
  Checkpoint checkpoint;
  RunRecord record;
};

// Trains until cfg.epochs, optionally continuing from a checkpoint.
// `available` holds every usable instance per task; the configured subset
// is sampled from it. Each finished epoch is passed to on_epoch.
inline TrainResult train(const TrainConfig& cfg, const TrainingData& available, std::size_t dim,
                         const TrainOptions& opt = {}, const Checkpoint* resume_from = nullptr,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  TrainingData data = select_training_data(cfg, available);
  Trainer trainer = resume_from ? Trainer::resume(*resume_from, cfg, std::move(data), opt)
                                : Trainer(cfg, std::move(data), dim, opt);
  TrainResult out;
  out.record.seed = cfg.seed;
  while (trainer.epochs_done() < cfg.epochs) {
    out.record.epochs.push_back(trainer.run_epoch());
    if (on_epoch) on_epoch(out.record.epochs.back());
  }
  out.checkpoint = trainer.checkpoint();
  out.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// n independent trainings with seeds base_seed + i.
inline std::vector<TrainResult> run_n(TrainConfig cfg, std::size_t n, std::uint64_t base_seed,
                                      const TrainingData& available, std::size_t dim,
                                      const TrainOptions& opt = {},
                                      const std::function<void(const EpochStats&)>& on_epoch = {}) {
  if (n < 1) fail(ErrorCategory::kUsage, "run count must be >= 1");
  std::vector<TrainResult> out;
  for (std::size_t i = 0; i < n; ++i) {
    cfg.seed = base_seed + i;
    out.push_back(train(cfg, available, dim, opt, nullptr, on_epoch));
  }
  return out;
}

}  // namespace blm
