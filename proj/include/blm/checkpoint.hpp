#pragma once

// Checkpoint files.
//
//   "BLMC" | u32 version | u64 header length | header (JSON text)
//   u64 tensor count | tensors
//   u64 optimizer count | per optimizer: u32 name length, name, u64 step,
//     f64 lr, beta1, beta2, eps, u64 tensor count, m tensors, v tensors
//
// A tensor is u32 rank, rank x u64 extents, then f64 values. All integers
// and floats are little-endian. Parameter tensors follow the model's visit
// order. Nothing time-dependent is written, so identical training
// trajectories give identical files.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "blm/data.hpp"
#include "blm/embeddings.hpp"
#include "blm/error.hpp"
#include "blm/model.hpp"
#include "blm/nn.hpp"

namespace blm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::size_t epochs_done = 0;
  std::string rng_state;  // epoch-shuffle generator
  std::map<std::string, nn::AdamState> optimizers;
};

inline nlohmann::json architecture(const Model& model) {
  using nlohmann::json;
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TwoLevelModel>) {
          json tasks = json::array();
          for (const auto& [t, head] : m.heads) tasks.push_back(task_name(t));
          return {{"kind", "two-level"},
                  {"dim", m.dims.dim},
                  {"sentence_hidden", m.dims.sentence_hidden},
                  {"sentence_latent", m.dims.sentence_latent},
                  {"task_hidden", m.dims.task_hidden},
                  {"task_latent", m.dims.task_latent},
                  {"tasks", tasks}};
        } else if constexpr (std::is_same_v<T, BaselineFfnn>) {
          return {{"kind", "ffnn"}, {"dim", m.dim()}};
        } else {
          return {{"kind", "cnn"}, {"dim", m.dim()}, {"channels", m.channels()}};
        }
      },
      model);
}

// Model with the described shapes; parameter values are placeholders.
inline Model model_from_architecture(const nlohmann::json& a) {
  Rng rng(0);
  const std::string kind = a.at("kind").get<std::string>();
  const std::size_t dim = a.at("dim").get<std::size_t>();
  if (kind == "two-level") {
    TwoLevelDims d;
    d.dim = dim;
    d.sentence_hidden = a.at("sentence_hidden").get<std::size_t>();
    d.sentence_latent = a.at("sentence_latent").get<std::size_t>();
    d.task_hidden = a.at("task_hidden").get<std::size_t>();
    d.task_latent = a.at("task_latent").get<std::size_t>();
    std::vector<Task> tasks;
    for (const auto& t : a.at("tasks")) {
      auto parsed = parse_task(t.get<std::string>());
      if (!parsed) fail(ErrorCategory::kFormat, "unknown task in architecture: " + t.dump());
      tasks.push_back(*parsed);
    }
    return TwoLevelModel::create(d, tasks, rng);
  }
  if (kind == "ffnn") return BaselineFfnn::create(dim, rng);
  if (kind == "cnn") return BaselineCnn::create(dim, a.at("channels").get<std::size_t>(), rng);
  fail(ErrorCategory::kFormat, "unknown model kind: " + kind);
}

inline std::vector<nn::Tensor*> model_tensors(Model& m) {
  return std::visit([](auto& x) { return nn::tensors_of(x); }, m);
}

inline std::vector<const nn::Tensor*> model_tensors(const Model& m) {
  return std::visit([](const auto& x) { return nn::tensors_of(x); }, m);
}

namespace detail {

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_tensor(std::string& out, const nn::Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
  for (auto e : t.shape()) put_u64(out, e);
  for (double v : t.values()) put_f64(out, v);
}

inline nn::Tensor read_tensor(ByteReader& r, const std::string& source) {
  const auto rank = r.u32("tensor rank");
  if (rank == 0 || rank > 8)
    fail(ErrorCategory::kFormat, source + ": implausible tensor rank " + std::to_string(rank));
  std::vector<std::size_t> shape(rank);
  std::uint64_t n = 1;
  for (auto& e : shape) {
    e = r.u64("tensor extent");
    if (e == 0 || n > (std::uint64_t{1} << 40) / e)
      fail(ErrorCategory::kFormat, source + ": implausible tensor extent");
    n *= e;
  }
  if (n * 8 > r.remaining())
    fail(ErrorCategory::kFormat, source + ": truncated checkpoint while reading tensor values");
  nn::Tensor t(shape);
  for (auto& v : t.values()) v = r.f64("tensor value");
  return t;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  nlohmann::json header = {{"architecture", architecture(c.model)},
                           {"config", c.config},
                           {"seed", c.seed},
                           {"epochs_done", c.epochs_done},
                           {"rng_state", c.rng_state}};
  const std::string h = header.dump();
  std::string out = "BLMC";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, h.size());
  out += h;
  const auto tensors = model_tensors(c.model);
  detail::put_u64(out, tensors.size());
  for (const auto* t : tensors) detail::put_tensor(out, *t);
  detail::put_u64(out, c.optimizers.size());
  for (const auto& [name, st] : c.optimizers) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u64(out, st.step);
    detail::put_f64(out, st.lr);
    detail::put_f64(out, st.beta1);
    detail::put_f64(out, st.beta2);
    detail::put_f64(out, st.eps);
    detail::put_u64(out, st.m.size());
    for (const auto& t : st.m) detail::put_tensor(out, t);
    for (const auto& t : st.v) detail::put_tensor(out, t);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes,
                                         const std::string& source = "<memory>") {
  detail::ByteReader r(bytes, source, "checkpoint");
  if (r.str(4, "magic") != "BLMC")
    fail(ErrorCategory::kFormat, source + ": bad magic (not a BLMC checkpoint)");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion)
    fail(ErrorCategory::kFormat,
         source + ": unsupported checkpoint version " + std::to_string(version));
  const auto hlen = r.u64("header length");
  if (hlen > r.remaining())
    fail(ErrorCategory::kFormat, source + ": truncated checkpoint while reading header");
  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(r.str(hlen, "header"));
    c.model = model_from_architecture(header.at("architecture"));
    c.config = header.at("config");
    c.seed = header.at("seed").get<std::uint64_t>();
    c.epochs_done = header.at("epochs_done").get<std::size_t>();
    c.rng_state = header.at("rng_state").get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCategory::kFormat, source + ": bad checkpoint header: " + e.what());
  }
  auto tensors = model_tensors(c.model);
  const auto count = r.u64("tensor count");
  if (count != tensors.size())
    fail(ErrorCategory::kFormat, source + ": architecture expects " +
                                     std::to_string(tensors.size()) + " tensors, file has " +
                                     std::to_string(count));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    nn::Tensor t = detail::read_tensor(r, source);
    if (!t.same_shape(*tensors[i]))
      fail(ErrorCategory::kFormat, source + ": tensor " + std::to_string(i) +
                                       " does not match the architecture");
    *tensors[i] = std::move(t);
  }
  const auto n_opt = r.u64("optimizer count");
  for (std::uint64_t k = 0; k < n_opt; ++k) {
    const std::string name = r.str(r.u32("optimizer name length"), "optimizer name");
    nn::AdamState st;
    st.step = r.u64("adam step");
    st.lr = r.f64("adam lr");
    st.beta1 = r.f64("adam beta1");
    st.beta2 = r.f64("adam beta2");
    st.eps = r.f64("adam eps");
    const auto n = r.u64("adam tensor count");
    if (n > count)
      fail(ErrorCategory::kFormat, source + ": optimizer '" + name + "' has too many tensors");
    for (std::uint64_t i = 0; i < n; ++i) st.m.push_back(detail::read_tensor(r, source));
    for (std::uint64_t i = 0; i < n; ++i) st.v.push_back(detail::read_tensor(r, source));
    c.optimizers.emplace(name, std::move(st));
  }
  if (r.remaining() != 0)
    fail(ErrorCategory::kFormat,
         source + ": " + std::to_string(r.remaining()) + " trailing bytes in checkpoint");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  const std::string bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write checkpoint: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::kIo, "write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kNotFound, "checkpoint not found: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path);
}

}  // namespace blm
