#pragma once

// Two-level sentence/task architecture and the FFNN/CNN baselines.
//
// The sentence level is a variational encoder-decoder that compresses one
// sentence embedding to a small latent and reconstructs it; the task level
// reads the seven stacked sentence latents and decodes an answer vector
// that is scored against the candidates by cosine.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "blm/data.hpp"
#include "blm/embeddings.hpp"
#include "blm/error.hpp"
#include "blm/nn.hpp"
#include "blm/random.hpp"

namespace blm {

using nn::Vec;

// ---------------------------------------------------------------------------
// variational encoder-decoder block

// in -> tanh(hidden) -> (mu, logvar) in R^latent x R^latent
// sample -> tanh(hidden) -> out
struct VaeBlock {
  nn::Dense enc_hidden;
  nn::Dense enc_stats;
  nn::Dense dec_hidden;
  nn::Dense dec_out;

  std::size_t in() const { return enc_hidden.in(); }
  std::size_t hidden() const { return enc_hidden.out(); }
  std::size_t latent() const { return dec_hidden.in(); }
  std::size_t out() const { return dec_out.out(); }

  static VaeBlock create(std::size_t in, std::size_t hidden, std::size_t latent,
                         std::size_t out, Rng& rng) {
    VaeBlock b;
    b.enc_hidden = nn::Dense::create(in, hidden, rng);
    b.enc_stats = nn::Dense::create(hidden, 2 * latent, rng);
    b.dec_hidden = nn::Dense::create(latent, hidden, rng);
    b.dec_out = nn::Dense::create(hidden, out, rng);
    return b;
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    nn::Dense::visit(self.enc_hidden, f);
    nn::Dense::visit(self.enc_stats, f);
    nn::Dense::visit(self.dec_hidden, f);
    nn::Dense::visit(self.dec_out, f);
  }
};

using SentenceVae = VaeBlock;
using TaskModule = VaeBlock;

struct VaeTrace {
  Vec enc_h;
  nn::GaussianLatent z;
  Vec dec_h;
  Vec out;
};

inline VaeTrace vae_forward(const VaeBlock& b, std::span<const double> in,
                            std::span<const double> eps) {
  require_shape(in.size() == b.in(), "vae_forward: input size " +
                                         std::to_string(in.size()) + ", expected " +
                                         std::to_string(b.in()));
  require_shape(eps.size() == b.latent(), "vae_forward: epsilon size mismatch");
  VaeTrace t;
  Vec pre(b.hidden());
  nn::dense_forward(b.enc_hidden, in, pre);
  t.enc_h.resize(b.hidden());
  nn::tanh_forward(pre, t.enc_h);
  Vec stats(2 * b.latent());
  nn::dense_forward(b.enc_stats, t.enc_h, stats);
  const std::span<const double> s(stats);
  t.z = nn::reparam_sample(s.first(b.latent()), s.last(b.latent()), eps);
  nn::dense_forward(b.dec_hidden, t.z.sample, pre);
  t.dec_h.resize(b.hidden());
  nn::tanh_forward(pre, t.dec_h);
  t.out.resize(b.out());
  nn::dense_forward(b.dec_out, t.dec_h, t.out);
  return t;
}

// Backpropagates d(out) plus an extra gradient arriving directly at the
// latent sample, and kl_scale times the KL gradient at (mu, logvar).
// din may be empty.
inline void vae_backward(const VaeBlock& b, std::span<const double> in,
                         const VaeTrace& t, std::span<const double> dout,
                         std::span<const double> dsample_extra, double kl_scale,
                         VaeBlock& grad, std::span<double> din = {}) {
  const std::size_t H = b.hidden(), L = b.latent();
  Vec d_dec_h(H, 0.0);
  nn::dense_backward(b.dec_out, t.dec_h, dout, grad.dec_out, d_dec_h);
  Vec d_pre(H, 0.0);
  nn::tanh_backward(t.dec_h, d_dec_h, d_pre);
  Vec dsample(L, 0.0);
  nn::dense_backward(b.dec_hidden, t.z.sample, d_pre, grad.dec_hidden, dsample);
  if (!dsample_extra.empty())
    for (std::size_t i = 0; i < L; ++i) dsample[i] += dsample_extra[i];
  Vec dstats(2 * L, 0.0);
  std::span<double> dmu = std::span<double>(dstats).first(L);
  std::span<double> dlogvar = std::span<double>(dstats).last(L);
  nn::reparam_backward(t.z, dsample, dmu, dlogvar);
  if (kl_scale != 0.0) nn::kl_std_normal(t.z.mu, t.z.logvar, dmu, dlogvar, kl_scale);
  Vec d_enc_h(H, 0.0);
  nn::dense_backward(b.enc_stats, t.enc_h, dstats, grad.enc_stats, d_enc_h);
  std::fill(d_pre.begin(), d_pre.end(), 0.0);
  nn::tanh_backward(t.enc_h, d_enc_h, d_pre);
  nn::dense_backward(b.enc_hidden, in, d_pre, grad.enc_hidden, din);
}

// ---------------------------------------------------------------------------
// two-level model

struct TwoLevelDims {
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t sentence_hidden = 128;
  std::size_t sentence_latent = 5;
  std::size_t task_hidden = 64;
  std::size_t task_latent = 16;

  friend bool operator==(const TwoLevelDims&, const TwoLevelDims&) = default;
};

struct TwoLevelModel {
  TwoLevelDims dims;
  SentenceVae shared;
  std::map<Task, TaskModule> heads;

  static TwoLevelModel create(const TwoLevelDims& dims, const std::vector<Task>& tasks,
                              Rng& rng) {
    if (tasks.empty()) fail(ErrorCategory::kUsage, "two-level model needs at least one task");
    TwoLevelModel m;
    m.dims = dims;
    m.shared = VaeBlock::create(dims.dim, dims.sentence_hidden, dims.sentence_latent,
                                dims.dim, rng);
    for (Task t : tasks) {
      if (m.heads.count(t)) fail(ErrorCategory::kUsage, "duplicate task head");
      m.heads.emplace(t, VaeBlock::create(kContextSize * dims.sentence_latent,
                                          dims.task_hidden, dims.task_latent, dims.dim, rng));
    }
    return m;
  }

  const TaskModule& head(Task t) const {
    auto it = heads.find(t);
    if (it == heads.end())
      fail(ErrorCategory::kData, "model has no head for task " + std::string(task_name(t)));
    return it->second;
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    VaeBlock::visit(self.shared, f);
    for (auto& [task, head] : self.heads) VaeBlock::visit(head, f);
  }
};

enum class NegativesPolicy {
  AnswerDistractor,  // 6 other context sentences + 1 answer distractor
  DuplicateContext,  // 6 other context sentences + one of them repeated
  ContextOnly,       // the 6 other context sentences
};

inline std::string_view negatives_policy_name(NegativesPolicy p) {
  switch (p) {
    case NegativesPolicy::AnswerDistractor: return "answer-distractor";
    case NegativesPolicy::DuplicateContext: return "duplicate-context";
    case NegativesPolicy::ContextOnly: return "context-only";
  }
  return "?";
}

inline std::optional<NegativesPolicy> parse_negatives_policy(std::string_view s) {
  if (s == "answer-distractor") return NegativesPolicy::AnswerDistractor;
  if (s == "duplicate-context") return NegativesPolicy::DuplicateContext;
  if (s == "context-only") return NegativesPolicy::ContextOnly;
  return std::nullopt;
}

// Embeddings of one instance converted to double precision.
struct InstanceVectors {
  std::array<Vec, kContextSize> context;
  std::array<Vec, kAnswerCount> answers;
  std::size_t correct = 0;
  Task task = Task::Agreement;
};

inline InstanceVectors to_vectors(const InstanceView& v, std::size_t dim) {
  InstanceVectors out;
  auto conv = [dim](const float* p) {
    if (!p) fail(ErrorCategory::kData, "unresolved embedding in instance view");
    return Vec(p, p + dim);
  };
  for (std::size_t i = 0; i < kContextSize; ++i) out.context[i] = conv(v.context[i]);
  for (std::size_t i = 0; i < kAnswerCount; ++i) out.answers[i] = conv(v.answers[i]);
  out.correct = v.correct;
  out.task = v.task;
  return out;
}

// Indices (into context, or kContextSize + answer position) of the
// contrastive negatives for context sentence k.
inline std::vector<std::size_t> sentence_negative_indices(
    std::size_t correct_answer, std::size_t k, NegativesPolicy policy) {
  if (k >= kContextSize) fail(ErrorCategory::kUsage, "sentence index out of range");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < kContextSize; ++j)
    if (j != k) out.push_back(j);
  if (policy == NegativesPolicy::AnswerDistractor) {
    std::vector<std::size_t> wrong;
    for (std::size_t a = 0; a < kAnswerCount; ++a)
      if (a != correct_answer) wrong.push_back(a);
    out.push_back(kContextSize + wrong[k % wrong.size()]);
  } else if (policy == NegativesPolicy::DuplicateContext) {
    out.push_back((k + 1) % kContextSize);
  }
  return out;
}

inline std::vector<Vec> sentence_negatives(const InstanceVectors& inst, std::size_t k,
                                           NegativesPolicy policy =
                                               NegativesPolicy::AnswerDistractor) {
  std::vector<Vec> out;
  for (auto idx : sentence_negative_indices(inst.correct, k, policy))
    out.push_back(idx < kContextSize ? inst.context[idx]
                                     : inst.answers[idx - kContextSize]);
  return out;
}

struct LossParts {
  double margin = 0.0;
  double kl = 0.0;
  double total() const { return margin + kl; }
};

// max_margin(reconstruction, in, negs) + kl_weight * KL. With grad set,
// adds scale * d(loss)/d(params) into it.
inline LossParts sentence_loss(const SentenceVae& vae, std::span<const double> in,
                               std::span<const Vec> negs, std::span<const double> eps,
                               double kl_weight = 1.0, SentenceVae* grad = nullptr,
                               double scale = 1.0) {
  require_shape(in.size() == vae.in(), "sentence_loss: input dim mismatch");
  const VaeTrace t = vae_forward(vae, in, eps);
  LossParts loss;
  Vec drecon(vae.out(), 0.0);
  loss.margin = nn::max_margin(t.out, in, negs, grad ? std::span<double>(drecon)
                                                     : std::span<double>{}, scale);
  loss.kl = kl_weight * nn::kl_std_normal(t.z.mu, t.z.logvar);
  if (grad) vae_backward(vae, in, t, drecon, {}, scale * kl_weight, *grad);
  return loss;
}

// Task level on 7 stacked sentence latents (length 7 * latent).
inline VaeTrace task_forward(const TaskModule& head, std::span<const double> latents,
                             std::span<const double> eps) {
  require_shape(latents.size() == head.in(),
                "task_forward: expected " + std::to_string(head.in()) +
                    " stacked latent values, got " + std::to_string(latents.size()));
  return vae_forward(head, latents, eps);
}

// max_margin(answ, correct, distractors) + kl_weight * KL(mu_S, logvar_S).
// Optional outputs receive scale * gradients.
inline LossParts task_loss(std::span<const double> answ, std::span<const double> correct,
                           std::span<const Vec> distractors, std::span<const double> mu_s,
                           std::span<const double> logvar_s, double kl_weight = 1.0,
                           std::span<double> danswer = {}, std::span<double> dmu = {},
                           std::span<double> dlogvar = {}, double scale = 1.0) {
  require_shape(answ.size() == correct.size(), "task_loss: dim mismatch");
  LossParts loss;
  loss.margin = nn::max_margin(answ, correct, distractors, danswer, scale);
  loss.kl = kl_weight * nn::kl_std_normal(mu_s, logvar_s, dmu, dlogvar, scale * kl_weight);
  return loss;
}

// Noise draws for one instance pass: one epsilon per context sentence and
// one for the task latent.
struct InstanceNoise {
  std::array<Vec, kContextSize> sentence;
  Vec task;

  static InstanceNoise zero(const TwoLevelDims& d) {
    InstanceNoise n;
    for (auto& s : n.sentence) s.assign(d.sentence_latent, 0.0);
    n.task.assign(d.task_latent, 0.0);
    return n;
  }

  static InstanceNoise draw(const TwoLevelDims& d, Rng& rng) {
    InstanceNoise n = zero(d);
    for (auto& s : n.sentence)
      for (auto& e : s) e = standard_normal(rng);
    for (auto& e : n.task) e = standard_normal(rng);
    return n;
  }
};

struct InstanceLoss {
  double sentence = 0.0;  // sum over the 7 context sentences
  double task = 0.0;
  double total() const { return sentence + task; }
};

// sum_k sentence_loss(in_k) + task_loss, with one backward pass through
// the shared sentence level accumulating both paths.
inline InstanceLoss instance_loss(const TwoLevelModel& model, const InstanceVectors& inst,
                                  const InstanceNoise& noise, double kl_weight = 1.0,
                                  NegativesPolicy policy = NegativesPolicy::AnswerDistractor,
                                  TwoLevelModel* grad = nullptr, double scale = 1.0) {
  const auto& d = model.dims;
  const TaskModule& head = model.head(inst.task);
  InstanceLoss loss;

  std::array<VaeTrace, kContextSize> traces;
  std::array<Vec, kContextSize> drecon;
  Vec stacked(kContextSize * d.sentence_latent);
  for (std::size_t k = 0; k < kContextSize; ++k) {
    traces[k] = vae_forward(model.shared, inst.context[k], noise.sentence[k]);
    const auto negs = sentence_negatives(inst, k, policy);
    drecon[k].assign(d.dim, 0.0);
    loss.sentence += nn::max_margin(traces[k].out, inst.context[k], negs,
                                    grad ? std::span<double>(drecon[k]) : std::span<double>{},
                                    scale);
    loss.sentence += kl_weight * nn::kl_std_normal(traces[k].z.mu, traces[k].z.logvar);
    std::copy(traces[k].z.sample.begin(), traces[k].z.sample.end(),
              stacked.begin() + static_cast<std::ptrdiff_t>(k * d.sentence_latent));
  }

  const VaeTrace task = task_forward(head, stacked, noise.task);
  std::vector<Vec> distractors;
  for (std::size_t a = 0; a < kAnswerCount; ++a)
    if (a != inst.correct) distractors.push_back(inst.answers[a]);
  Vec danswer(d.dim, 0.0);
  const LossParts tl = task_loss(task.out, inst.answers[inst.correct], distractors,
                                 task.z.mu, task.z.logvar, kl_weight,
                                 grad ? std::span<double>(danswer) : std::span<double>{},
                                 {}, {}, scale);
  loss.task = tl.total();

  if (grad) {
    TaskModule& ghead = grad->heads.at(inst.task);
    Vec dstacked(stacked.size(), 0.0);
    vae_backward(head, stacked, task, danswer, {}, scale * kl_weight, ghead, dstacked);
    for (std::size_t k = 0; k < kContextSize; ++k) {
      const std::span<const double> dz =
          std::span<const double>(dstacked).subspan(k * d.sentence_latent, d.sentence_latent);
      vae_backward(model.shared, inst.context[k], traces[k], drecon[k], dz,
                   scale * kl_weight, grad->shared);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// baselines

struct BaselineFfnn {
  nn::Dense l1;  // 7d -> 3.5d
  nn::Dense l2;  // 3.5d -> 3.5d
  nn::Dense l3;  // 3.5d -> d

  std::size_t dim() const { return l3.out(); }

  static std::size_t hidden_for(std::size_t dim) { return (kContextSize * dim + 1) / 2; }

  static BaselineFfnn create(std::size_t dim, Rng& rng) {
    const std::size_t h = hidden_for(dim);
    BaselineFfnn m;
    m.l1 = nn::Dense::create(kContextSize * dim, h, rng);
    m.l2 = nn::Dense::create(h, h, rng);
    m.l3 = nn::Dense::create(h, dim, rng);
    return m;
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    nn::Dense::visit(self.l1, f);
    nn::Dense::visit(self.l2, f);
    nn::Dense::visit(self.l3, f);
  }
};

struct BaselineCnn {
  nn::Conv2d c1;  // 1 -> channels
  nn::Conv2d c2;  // channels -> channels
  nn::Conv2d c3;  // channels -> channels
  nn::Dense fc;   // channels * 7 * d -> d

  std::size_t dim() const { return fc.out(); }
  std::size_t channels() const { return c1.out_channels(); }

  static BaselineCnn create(std::size_t dim, std::size_t channels, Rng& rng) {
    BaselineCnn m;
    m.c1 = nn::Conv2d::create(1, channels, 3, 1, rng);
    m.c2 = nn::Conv2d::create(channels, channels, 3, 1, rng);
    m.c3 = nn::Conv2d::create(channels, channels, 3, 1, rng);
    m.fc = nn::Dense::create(channels * kContextSize * dim, dim, rng);
    return m;
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    nn::Conv2d::visit(self.c1, f);
    nn::Conv2d::visit(self.c2, f);
    nn::Conv2d::visit(self.c3, f);
    nn::Dense::visit(self.fc, f);
  }
};

struct FfnnTrace {
  Vec input, h1, h2, out;
};

inline FfnnTrace baseline_forward(const BaselineFfnn& m,
                                  const std::array<Vec, kContextSize>& context) {
  const std::size_t d = m.dim();
  FfnnTrace t;
  t.input.reserve(kContextSize * d);
  for (const auto& s : context) {
    require_shape(s.size() == d, "baseline_forward: context embedding dim mismatch");
    t.input.insert(t.input.end(), s.begin(), s.end());
  }
  Vec pre(m.l1.out());
  nn::dense_forward(m.l1, t.input, pre);
  t.h1.resize(pre.size());
  nn::tanh_forward(pre, t.h1);
  nn::dense_forward(m.l2, t.h1, pre);
  t.h2.resize(pre.size());
  nn::tanh_forward(pre, t.h2);
  t.out.resize(d);
  nn::dense_forward(m.l3, t.h2, t.out);
  return t;
}

inline void baseline_backward(const BaselineFfnn& m, const FfnnTrace& t,
                              std::span<const double> dout, BaselineFfnn& grad) {
  Vec dh2(t.h2.size(), 0.0), dpre(t.h2.size(), 0.0);
  nn::dense_backward(m.l3, t.h2, dout, grad.l3, dh2);
  nn::tanh_backward(t.h2, dh2, dpre);
  Vec dh1(t.h1.size(), 0.0);
  nn::dense_backward(m.l2, t.h1, dpre, grad.l2, dh1);
  std::fill(dpre.begin(), dpre.end(), 0.0);
  nn::tanh_backward(t.h1, dh1, dpre);
  nn::dense_backward(m.l1, t.input, dpre, grad.l1, {});
}

struct CnnTrace {
  nn::Tensor input, a1, a2, a3;  // a_i = tanh(conv_i(...))
  Vec out;
};

inline CnnTrace baseline_forward(const BaselineCnn& m,
                                 const std::array<Vec, kContextSize>& context) {
  const std::size_t d = m.dim();
  CnnTrace t;
  t.input = nn::Tensor({1, kContextSize, d});
  for (std::size_t r = 0; r < kContextSize; ++r) {
    require_shape(context[r].size() == d, "baseline_forward: context embedding dim mismatch");
    std::copy(context[r].begin(), context[r].end(), t.input.data() + r * d);
  }
  auto act = [](nn::Tensor x) {
    for (auto& v : x.values()) v = std::tanh(v);
    return x;
  };
  t.a1 = act(nn::conv2d_forward(m.c1, t.input));
  t.a2 = act(nn::conv2d_forward(m.c2, t.a1));
  t.a3 = act(nn::conv2d_forward(m.c3, t.a2));
  require_shape(t.a3.size() == m.fc.in(), "baseline_forward: conv output does not match fc");
  t.out.resize(d);
  nn::dense_forward(m.fc, t.a3.values(), t.out);
  return t;
}

inline void baseline_backward(const BaselineCnn& m, const CnnTrace& t,
                              std::span<const double> dout, BaselineCnn& grad) {
  nn::Tensor da3(t.a3.shape());
  nn::dense_backward(m.fc, t.a3.values(), dout, grad.fc, da3.values());
  auto through_tanh = [](const nn::Tensor& a, const nn::Tensor& da) {
    nn::Tensor dz(a.shape());
    nn::tanh_backward(a.values(), da.values(), dz.values());
    return dz;
  };
  nn::Tensor da2(t.a2.shape());
  nn::conv2d_backward(m.c3, t.a2, through_tanh(t.a3, da3), grad.c3, &da2);
  nn::Tensor da1(t.a1.shape());
  nn::conv2d_backward(m.c2, t.a1, through_tanh(t.a2, da2), grad.c2, &da1);
  nn::conv2d_backward(m.c1, t.input, through_tanh(t.a1, da1), grad.c1, nullptr);
}

// Summed hinge over the incorrect candidates.
inline double baseline_loss(std::span<const double> e_pred, std::span<const double> e_correct,
                            std::span<const Vec> others, std::span<double> dpred = {},
                            double scale = 1.0) {
  return nn::hinge_sum(e_pred, e_correct, others, dpred, scale);
}

// ---------------------------------------------------------------------------
// any model

using Model = std::variant<TwoLevelModel, BaselineFfnn, BaselineCnn>;

inline std::size_t model_dim(const Model& m) {
  return std::visit(
      [](const auto& x) -> std::size_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TwoLevelModel>) return x.dims.dim;
        else return x.dim();
      },
      m);
}

struct Prediction {
  std::size_t index = 0;
  std::array<double, kAnswerCount> scores{};
};

// Highest-cosine candidate; ties go to the lowest index.
inline Prediction choose(std::span<const double> answer,
                         const std::array<Vec, kAnswerCount>& candidates) {
  Prediction p;
  for (std::size_t i = 0; i < kAnswerCount; ++i) {
    p.scores[i] = nn::cosine(answer, candidates[i]);
    if (p.scores[i] > p.scores[p.index]) p.index = i;
  }
  return p;
}

// Answer vector produced at inference (epsilon = 0 for the two-level model).
inline Vec infer_answer(const Model& model, const InstanceVectors& inst) {
  return std::visit(
      [&](const auto& m) -> Vec {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TwoLevelModel>) {
          const auto noise = InstanceNoise::zero(m.dims);
          Vec stacked;
          for (std::size_t k = 0; k < kContextSize; ++k) {
            const auto t = vae_forward(m.shared, inst.context[k], noise.sentence[k]);
            stacked.insert(stacked.end(), t.z.sample.begin(), t.z.sample.end());
          }
          return task_forward(m.head(inst.task), stacked, noise.task).out;
        } else {
          return baseline_forward(m, inst.context).out;
        }
      },
      model);
}

inline Prediction predict(const Model& model, const InstanceVectors& inst) {
  return choose(infer_answer(model, inst), inst.answers);
}

}  // namespace blm
