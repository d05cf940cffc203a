#pragma once

// Small differentiable kernels with hand-written gradients: dense layers,
// 3x3 convolution, tanh, reparameterized Gaussian sampling, cosine
// similarity, max-margin losses, Gaussian KL, and Adam.
//
// Backward functions accumulate (+=) into parameter and input gradients.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "blm/error.hpp"
#include "blm/random.hpp"

namespace blm::nn {

using Vec = std::vector<double>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (auto d : shape_) {
      if (d == 0) fail(ErrorCategory::kShape, "tensor dimension must be positive");
      n *= d;
    }
    data_.assign(n, fill);
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Parameter containers expose `static void visit(Self&, F&&)` which calls
// F on every tensor in a fixed order.
template <class M, class F>
void for_each_tensor(M& model, F&& f) {
  std::remove_const_t<M>::visit(model, f);
}

template <class M>
std::vector<Tensor*> tensors_of(M& model) {
  std::vector<Tensor*> out;
  for_each_tensor(model, [&](Tensor& t) { out.push_back(&t); });
  return out;
}

template <class M>
std::vector<const Tensor*> tensors_of(const M& model) {
  std::vector<const Tensor*> out;
  for_each_tensor(model, [&](const Tensor& t) { out.push_back(&t); });
  return out;
}

template <class M>
M zeros_like(const M& model) {
  M out = model;
  for_each_tensor(out, [](Tensor& t) { t.fill(0.0); });
  return out;
}

// a += b for structurally identical containers.
template <class M>
void add_into(M& a, const M& b) {
  auto dst = tensors_of(a);
  auto src = tensors_of(b);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto d = dst[i]->values();
    auto s = src[i]->values();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
  }
}

template <class M>
std::size_t parameter_count(const M& model) {
  std::size_t n = 0;
  for_each_tensor(model, [&](const Tensor& t) { n += t.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// dense

struct Dense {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  std::size_t in() const { return weight.shape().at(1); }
  std::size_t out() const { return weight.shape().at(0); }

  // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  static Dense create(std::size_t in, std::size_t out, Rng& rng) {
    Dense d{Tensor({out, in}), Tensor({out})};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : d.weight.values()) w = (2.0 * uniform01(rng) - 1.0) * bound;
    for (auto& b : d.bias.values()) b = (2.0 * uniform01(rng) - 1.0) * bound;
    return d;
  }

  static Dense identity(std::size_t n) {
    Dense d{Tensor({n, n}), Tensor({n})};
    for (std::size_t i = 0; i < n; ++i) d.weight[i * n + i] = 1.0;
    return d;
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(self.weight);
    f(self.bias);
  }
};

inline void dense_forward(const Dense& d, std::span<const double> x,
                          std::span<double> y) {
  const std::size_t in = d.in(), out = d.out();
  require_shape(x.size() == in && y.size() == out,
                "dense_forward: expected " + std::to_string(in) + "->" +
                    std::to_string(out) + ", got " + std::to_string(x.size()) +
                    "->" + std::to_string(y.size()));
  const double* w = d.weight.data();
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = w + o * in;
    double acc = d.bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// dx may be empty when the input gradient is not needed.
inline void dense_backward(const Dense& d, std::span<const double> x,
                           std::span<const double> dy, Dense& grad,
                           std::span<double> dx) {
  const std::size_t in = d.in(), out = d.out();
  require_shape(x.size() == in && dy.size() == out && grad.weight.same_shape(d.weight),
                "dense_backward: shape mismatch");
  require_shape(dx.empty() || dx.size() == in, "dense_backward: dx shape mismatch");
  const double* w = d.weight.data();
  double* gw = grad.weight.data();
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    grad.bias[o] += g;
    double* grow = gw + o * in;
    for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
    if (!dx.empty()) {
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
    }
  }
}

// ---------------------------------------------------------------------------
// 2-D convolution, stride 1, no dilation, square kernel, zero padding

struct Conv2d {
  Tensor weight;  // [out_ch, in_ch, k, k]
  Tensor bias;    // [out_ch]
  std::size_t padding = 1;

  std::size_t in_channels() const { return weight.shape().at(1); }
  std::size_t out_channels() const { return weight.shape().at(0); }
  std::size_t kernel() const { return weight.shape().at(2); }

  std::size_t out_extent(std::size_t n) const {
    const std::size_t k = kernel();
    require_shape(n + 2 * padding >= k, "conv2d: input smaller than kernel");
    return n + 2 * padding - k + 1;
  }

  static Conv2d create(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                       std::size_t padding, Rng& rng) {
    Conv2d c{Tensor({out_ch, in_ch, kernel, kernel}), Tensor({out_ch}), padding};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
    for (auto& w : c.weight.values()) w = (2.0 * uniform01(rng) - 1.0) * bound;
    for (auto& b : c.bias.values()) b = (2.0 * uniform01(rng) - 1.0) * bound;
    return c;
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(self.weight);
    f(self.bias);
  }
};

// x: [in_ch, H, W] -> y: [out_ch, H', W'] with H' = H + 2p - k + 1.
inline Tensor conv2d_forward(const Conv2d& c, const Tensor& x) {
  require_shape(x.shape().size() == 3 && x.shape()[0] == c.in_channels(),
                "conv2d_forward: input must be [in_ch, H, W]");
  const std::size_t C = c.in_channels(), O = c.out_channels(), K = c.kernel();
  const std::size_t H = x.shape()[1], W = x.shape()[2];
  const std::size_t OH = c.out_extent(H), OW = c.out_extent(W);
  const auto P = static_cast<std::ptrdiff_t>(c.padding);
  Tensor y({O, OH, OW});
  for (std::size_t o = 0; o < O; ++o) {
    double* yo = y.data() + o * OH * OW;
    for (std::size_t i = 0; i < OH * OW; ++i) yo[i] = c.bias[o];
    for (std::size_t ci = 0; ci < C; ++ci) {
      const double* xc = x.data() + ci * H * W;
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          const double w = c.weight[((o * C + ci) * K + ky) * K + kx];
          for (std::size_t oy = 0; oy < OH; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - P;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * W;
            double* yrow = yo + oy * OW;
            const auto shift = static_cast<std::ptrdiff_t>(kx) - P;
            const std::size_t ox0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
            const auto ox1 = std::min<std::ptrdiff_t>(
                static_cast<std::ptrdiff_t>(OW), static_cast<std::ptrdiff_t>(W) - shift);
            for (auto ox = static_cast<std::ptrdiff_t>(ox0); ox < ox1; ++ox)
              yrow[ox] += w * xrow[ox + shift];
          }
        }
      }
    }
  }
  return y;
}

// dx may be null when the input gradient is not needed.
inline void conv2d_backward(const Conv2d& c, const Tensor& x, const Tensor& dy,
                            Conv2d& grad, Tensor* dx) {
  const std::size_t C = c.in_channels(), O = c.out_channels(), K = c.kernel();
  const std::size_t H = x.shape().at(1), W = x.shape().at(2);
  const std::size_t OH = c.out_extent(H), OW = c.out_extent(W);
  require_shape(dy.shape() == std::vector<std::size_t>{O, OH, OW},
                "conv2d_backward: dy shape mismatch");
  require_shape(!dx || dx->same_shape(x), "conv2d_backward: dx shape mismatch");
  const auto P = static_cast<std::ptrdiff_t>(c.padding);
  for (std::size_t o = 0; o < O; ++o) {
    const double* dyo = dy.data() + o * OH * OW;
    double bsum = 0.0;
    for (std::size_t i = 0; i < OH * OW; ++i) bsum += dyo[i];
    grad.bias[o] += bsum;
    for (std::size_t ci = 0; ci < C; ++ci) {
      const double* xc = x.data() + ci * H * W;
      double* dxc = dx ? dx->data() + ci * H * W : nullptr;
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          const std::size_t widx = ((o * C + ci) * K + ky) * K + kx;
          const double w = c.weight[widx];
          double gw = 0.0;
          for (std::size_t oy = 0; oy < OH; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - P;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * W;
            const double* dyrow = dyo + oy * OW;
            const auto shift = static_cast<std::ptrdiff_t>(kx) - P;
            const std::size_t ox0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
            const auto ox1 = std::min<std::ptrdiff_t>(
                static_cast<std::ptrdiff_t>(OW), static_cast<std::ptrdiff_t>(W) - shift);
            for (auto ox = static_cast<std::ptrdiff_t>(ox0); ox < ox1; ++ox) {
              gw += dyrow[ox] * xrow[ox + shift];
              if (dxc) dxc[static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ox + shift)] += w * dyrow[ox];
            }
          }
          grad.weight[widx] += gw;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// nonlinearity (tanh)

inline void tanh_forward(std::span<const double> x, std::span<double> y) {
  require_shape(x.size() == y.size(), "tanh_forward: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
}

// Uses the forward output y: d tanh = 1 - y^2.
inline void tanh_backward(std::span<const double> y, std::span<const double> dy,
                          std::span<double> dx) {
  require_shape(y.size() == dy.size() && y.size() == dx.size(),
                "tanh_backward: size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

// ---------------------------------------------------------------------------
// reparameterized Gaussian

struct GaussianLatent {
  Vec mu;
  Vec logvar;
  Vec sample;   // mu + exp(logvar / 2) * epsilon
  Vec epsilon;
};

inline GaussianLatent reparam_sample(std::span<const double> mu,
                                     std::span<const double> logvar,
                                     std::span<const double> epsilon) {
  require_shape(mu.size() == logvar.size() && mu.size() == epsilon.size(),
                "reparam_sample: size mismatch");
  GaussianLatent z{Vec(mu.begin(), mu.end()), Vec(logvar.begin(), logvar.end()),
                   Vec(mu.size()), Vec(epsilon.begin(), epsilon.end())};
  for (std::size_t i = 0; i < mu.size(); ++i)
    z.sample[i] = mu[i] + std::exp(0.5 * logvar[i]) * epsilon[i];
  return z;
}

inline GaussianLatent reparam_sample(std::span<const double> mu,
                                     std::span<const double> logvar, Rng& rng) {
  Vec eps(mu.size());
  for (auto& e : eps) e = standard_normal(rng);
  return reparam_sample(mu, logvar, eps);
}

inline void reparam_backward(const GaussianLatent& z, std::span<const double> dsample,
                             std::span<double> dmu, std::span<double> dlogvar) {
  require_shape(dsample.size() == z.mu.size() && dmu.size() == z.mu.size() &&
                    dlogvar.size() == z.mu.size(),
                "reparam_backward: size mismatch");
  for (std::size_t i = 0; i < z.mu.size(); ++i) {
    dmu[i] += dsample[i];
    dlogvar[i] += dsample[i] * 0.5 * std::exp(0.5 * z.logvar[i]) * z.epsilon[i];
  }
}

// ---------------------------------------------------------------------------
// cosine similarity

// Number of cosine evaluations that met a zero-norm operand.
inline std::atomic<std::uint64_t>& cosine_degenerate_count() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// Zero-norm operands give 0 (and no gradient) instead of NaN.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  require_shape(a.size() == b.size(), "cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) {
    cosine_degenerate_count().fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  return ab / std::sqrt(aa * bb);
}

// da += scale * d cos(a, b) / da
inline void cosine_backward(std::span<const double> a, std::span<const double> b,
                            double scale, std::span<double> da) {
  require_shape(a.size() == b.size() && da.size() == a.size(),
                "cosine_backward: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return;
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double cos = ab / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i)
    da[i] += scale * (b[i] / (na * nb) - cos * a[i] / aa);
}

// ---------------------------------------------------------------------------
// losses. Each returns the value and, when dx is non-empty, adds
// scale * gradient with respect to the first argument.

// max(0, 1 - cos(x, pos) + mean_i cos(x, neg_i))
inline double max_margin(std::span<const double> x, std::span<const double> pos,
                         std::span<const Vec> negs, std::span<double> dx = {},
                         double scale = 1.0) {
  if (negs.empty()) fail(ErrorCategory::kUsage, "max_margin: empty negative set");
  const double n = static_cast<double>(negs.size());
  double mean_neg = 0.0;
  for (const auto& neg : negs) mean_neg += cosine(x, neg);
  mean_neg /= n;
  const double raw = 1.0 - cosine(x, pos) + mean_neg;
  if (raw <= 0.0) return 0.0;
  if (!dx.empty()) {
    cosine_backward(x, pos, -scale, dx);
    for (const auto& neg : negs) cosine_backward(x, neg, scale / n, dx);
  }
  return raw;
}

// Summed hinge sum_i max(0, 1 - cos(correct, pred) + cos(distractor_i, pred)).
inline double hinge_sum(std::span<const double> pred, std::span<const double> correct,
                        std::span<const Vec> distractors, std::span<double> dpred = {},
                        double scale = 1.0) {
  if (distractors.empty()) fail(ErrorCategory::kUsage, "hinge_sum: no distractors");
  const double pos = cosine(pred, correct);
  double total = 0.0;
  for (const auto& d : distractors) {
    const double term = 1.0 - pos + cosine(pred, d);
    if (term <= 0.0) continue;
    total += term;
    if (!dpred.empty()) {
      cosine_backward(pred, correct, -scale, dpred);
      cosine_backward(pred, d, scale, dpred);
    }
  }
  return total;
}

// KL(N(mu, diag(exp(logvar))) || N(0, I)) = -0.5 sum(1 + logvar - mu^2 - exp(logvar))
inline double kl_std_normal(std::span<const double> mu, std::span<const double> logvar,
                            std::span<double> dmu = {}, std::span<double> dlogvar = {},
                            double scale = 1.0) {
  require_shape(mu.size() == logvar.size(), "kl_std_normal: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double ev = std::exp(logvar[i]);
    kl += -0.5 * (1.0 + logvar[i] - mu[i] * mu[i] - ev);
    if (!dmu.empty()) dmu[i] += scale * mu[i];
    if (!dlogvar.empty()) dlogvar[i] += scale * 0.5 * (ev - 1.0);
  }
  return kl;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(std::span<const Tensor* const> params, double lr = 1e-3) {
    AdamState s;
    s.lr = lr;
    for (const Tensor* p : params) {
      s.m.emplace_back(p->shape());
      s.v.emplace_back(p->shape());
    }
    return s;
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update of params in place.
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                      AdamState& st) {
  require_shape(params.size() == grads.size() && params.size() == st.m.size() &&
                    params.size() == st.v.size(),
                "adam_step: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    require_shape(params[i]->same_shape(*grads[i]) && params[i]->same_shape(st.m[i]) &&
                      params[i]->same_shape(st.v[i]),
                  "adam_step: shape mismatch at tensor " + std::to_string(i));
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = st.m[i].values();
    auto v = st.v[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g[k];
      v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g[k] * g[k];
      p[k] -= st.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + st.eps);
    }
  }
}

}  // namespace blm::nn
