#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "blm.hpp"

namespace blm::fx {

inline std::string source_path(const std::string& rel) {
  return std::string(BLM_SOURCE_DIR) + "/" + rel;
}

inline const Lexicon& demo_lexicon() {
  static const Lexicon lex = load_lexicon(source_path("data/demo.lex"));
  return lex;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("blm-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline nn::Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  nn::Vec v(n);
  for (auto& x : v) x = scale * standard_normal(rng);
  return v;
}

// Central finite differences of loss() against an analytic gradient, over
// every coordinate (or `per_tensor` coordinates per tensor, spread evenly).
// Relative error is |a - n| / max(|a|, |n|, floor) per coordinate;
// max_norm_rel is the same ratio taken over whole tensors in the 2-norm.
struct GradCheck {
  double max_rel = 0.0;
  double max_norm_rel = 0.0;
  std::size_t checked = 0;
};

inline GradCheck check_gradient(const std::function<double()>& loss,
                                const std::vector<nn::Tensor*>& params,
                                const std::vector<const nn::Tensor*>& analytic,
                                double h = 1e-4, std::size_t per_tensor = 0,
                                double floor = 1e-6) {
  GradCheck out;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t]->values();
    const auto g = analytic[t]->values();
    const std::size_t n = p.size();
    const std::size_t count = per_tensor == 0 ? n : std::min(n, per_tensor);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t k = count == n ? c : (c * n) / count;
      const double orig = p[k];
      p[k] = orig + h;
      const double up = loss();
      p[k] = orig - h;
      const double down = loss();
      p[k] = orig;
      const double num = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(g[k]), std::abs(num), floor});
      out.max_rel = std::max(out.max_rel, std::abs(g[k] - num) / denom);
      diff2 += (g[k] - num) * (g[k] - num);
      a2 += g[k] * g[k];
      n2 += num * num;
      ++out.checked;
    }
    out.max_norm_rel = std::max(
        out.max_norm_rel, std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor}));
  }
  return out;
}

// Same for a plain input vector.
inline GradCheck check_input_gradient(const std::function<double()>& loss, nn::Vec& x,
                                      const nn::Vec& analytic, double h = 1e-4,
                                      double floor = 1e-6) {
  nn::Tensor t({x.size()});
  std::copy(x.begin(), x.end(), t.data());
  nn::Tensor g({x.size()});
  std::copy(analytic.begin(), analytic.end(), g.data());
  auto wrapped = [&] {
    std::copy(t.data(), t.data() + x.size(), x.begin());
    return loss();
  };
  auto r = check_gradient(wrapped, {&t}, {&g}, h, 0, floor);
  std::copy(t.data(), t.data() + x.size(), x.begin());
  return r;
}

// Agreement (or other task) instances with their oracle store.
struct OracleSet {
  std::vector<BlmInstance> instances;
  EmbeddingStore store{128};
  std::vector<InstanceView> views;
};

inline std::unique_ptr<OracleSet> oracle_set(Task task, LexType type, std::size_t count,
                                             std::uint64_t seed, std::size_t dim = 128,
                                             double noise = 0.1) {
  auto s = std::make_unique<OracleSet>();
  s->instances = generate(task, type, demo_lexicon(), count, seed);
  s->store = EmbeddingStore(dim);
  for (const auto& r : sentence_inventory(s->instances))
    s->store.put(r.id, oracle_encode(r, dim, noise, seed));
  s->views = resolve(s->instances, s->store);
  return s;
}

}  // namespace blm::fx
