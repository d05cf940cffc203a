#pragma once

// Sentence-embedding store keyed by sentence id, its binary file format,
// and two deterministic encoders used in place of a transformer:
// mock_encode (hashed random unit vectors) and oracle_encode (vectors that
// literally spell out chunk structure).
//
// Store file layout, all integers and floats little-endian:
//   magic "BLME" | u32 version | u32 dim | u64 count |
//   count x { u32 id_len | id bytes (UTF-8) | dim x f32 }

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "blm/data.hpp"
#include "blm/error.hpp"
#include "blm/random.hpp"

namespace blm {

inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kDefaultEmbeddingDim = 768;

class EmbeddingStore {
 public:
  using Vector = std::vector<float>;

  explicit EmbeddingStore(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {
    if (dim == 0) fail(ErrorCategory::kUsage, "embedding dim must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Inserts or replaces. Rejects wrong length and non-finite values.
  void put(const std::string& id, Vector v) {
    if (v.size() != dim_)
      fail(ErrorCategory::kShape, "embedding for '" + id + "' has length " +
                                      std::to_string(v.size()) + ", store dim is " +
                                      std::to_string(dim_));
    for (float x : v)
      if (!std::isfinite(x))
        fail(ErrorCategory::kData, "non-finite embedding value for '" + id + "'");
    entries_[id] = std::move(v);
  }

  const Vector* find(const std::string& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& id) const { return entries_.count(id) != 0; }

  const std::map<std::string, Vector>& entries() const { return entries_; }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::size_t dim_;
  std::map<std::string, Vector> entries_;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> bytes, std::string source,
             std::string kind = "store")
      : bytes_(bytes), source_(std::move(source)), kind_(std::move(kind)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      fail(ErrorCategory::kFormat, source_ + ": truncated " + kind_ + " while reading " +
                                       what + " at byte " + std::to_string(pos_));
  }

  std::span<const unsigned char> bytes_;
  std::string source_;
  std::string kind_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_store(const EmbeddingStore& store) {
  std::string out = "BLME";
  detail::put_u32(out, kStoreVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(store.dim()));
  detail::put_u64(out, store.size());
  for (const auto& [id, v] : store.entries()) {
    detail::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    for (float x : v) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

inline EmbeddingStore deserialize_store(std::span<const unsigned char> bytes,
                                        const std::string& source = "<memory>") {
  detail::ByteReader r(bytes, source);
  if (r.str(4, "magic") != "BLME")
    fail(ErrorCategory::kFormat, source + ": bad magic (not a BLME store)");
  const auto version = r.u32("version");
  if (version != kStoreVersion)
    fail(ErrorCategory::kFormat, source + ": unsupported store version " +
                                     std::to_string(version));
  const auto dim = r.u32("dim");
  if (dim == 0) fail(ErrorCategory::kFormat, source + ": dim is zero");
  const auto count = r.u64("count");
  EmbeddingStore store(dim);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.u32("id length");
    std::string id = r.str(len, "id");
    std::vector<float> v(dim);
    for (auto& x : v) {
      x = r.f32("vector");
      if (!std::isfinite(x))
        fail(ErrorCategory::kFormat, source + ": NaN/Inf payload in record '" + id + "'");
    }
    if (store.contains(id))
      fail(ErrorCategory::kFormat, source + ": duplicate id '" + id + "'");
    store.put(id, std::move(v));
  }
  if (r.remaining() != 0)
    fail(ErrorCategory::kFormat, source + ": " + std::to_string(r.remaining()) +
                                     " trailing bytes after " +
                                     std::to_string(count) + " records");
  return store;
}

inline void store_write(const EmbeddingStore& store, const std::string& path) {
  const std::string bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write store: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::kIo, "write failed: " + path);
}

inline EmbeddingStore store_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kNotFound, "store not found: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_store(bytes, path);
}

// ---------------------------------------------------------------------------
// encoders

inline std::vector<float> normalized_float(const std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

// Seeded Gaussian direction derived from the sentence text.
inline std::vector<float> mock_encode(const SentenceRecord& record,
                                      std::size_t dim, std::uint64_t seed) {
  if (dim < 1) fail(ErrorCategory::kUsage, "mock_encode: dim must be >= 1");
  Rng rng(mix_seed({fnv1a64(record.text), seed}));
  std::vector<double> v(dim);
  for (auto& x : v) x = standard_normal(rng);
  return normalized_float(v);
}

// Oracle layout. Coordinates [0, kOracleBlockSize) carry structure as
// +1 (set) / -1 (unset); the rest carry only noise.
//   [0,17)  role one-hot per chunk position, with a per-position vocabulary
//   [17,25) number bits: position p -> 17 + 2p (sg), 18 + 2p (pl)
//   25      passive voice
//   26, 27  subject is agent / subject is patient
//   28      coordinated PP
inline constexpr std::size_t kOracleBlockSize = 29;
inline constexpr std::size_t kOracleMinDim = 32;

namespace detail {

struct OraclePosition {
  std::size_t offset;
  std::vector<ChunkRole> vocab;
};

inline const std::array<OraclePosition, 4>& oracle_positions() {
  using R = ChunkRole;
  static const std::array<OraclePosition, 4> kPositions{{
      {0, {R::NpSubj, R::Ag, R::Pat}},
      {3, {R::Pp1, R::AktV, R::PassV}},
      {6, {R::Pp2, R::Vp, R::Ag, R::Pat, R::DaAg, R::DaPat, R::PNp, R::DaNp}},
      {14, {R::Vp, R::PNp, R::DaNp}},
  }};
  return kPositions;
}

}  // namespace detail

inline constexpr std::size_t kOracleNumberOffset = 17;
inline constexpr std::size_t kOracleVoiceBit = 25;
inline constexpr std::size_t kOracleAgentSubjectBit = 26;
inline constexpr std::size_t kOraclePatientSubjectBit = 27;
inline constexpr std::size_t kOracleCoordBit = 28;

inline std::array<double, kOracleBlockSize> oracle_structural_block(
    const SentenceRecord& record) {
  std::array<double, kOracleBlockSize> block;
  block.fill(-1.0);
  const auto& positions = detail::oracle_positions();
  if (record.chunks.size() > positions.size())
    fail(ErrorCategory::kData, "oracle_encode: more than 4 chunks in " + record.id);
  for (std::size_t p = 0; p < record.chunks.size(); ++p) {
    const Chunk& c = record.chunks[p];
    const auto& pos = positions[p];
    const auto it = std::find(pos.vocab.begin(), pos.vocab.end(), c.role);
    if (it == pos.vocab.end())
      fail(ErrorCategory::kData, "oracle_encode: role " + std::string(role_name(c.role)) +
                                     " not encodable at position " + std::to_string(p));
    block[pos.offset + static_cast<std::size_t>(it - pos.vocab.begin())] = 1.0;
    if (c.number == Number::Sg) block[kOracleNumberOffset + 2 * p] = 1.0;
    if (c.number == Number::Pl) block[kOracleNumberOffset + 2 * p + 1] = 1.0;
    if (c.role == ChunkRole::PassV) block[kOracleVoiceBit] = 1.0;
    if (c.coordinated) block[kOracleCoordBit] = 1.0;
  }
  if (!record.chunks.empty()) {
    if (record.chunks.front().role == ChunkRole::Ag) block[kOracleAgentSubjectBit] = 1.0;
    if (record.chunks.front().role == ChunkRole::Pat) block[kOraclePatientSubjectBit] = 1.0;
  }
  return block;
}

// Structure plus noise, before normalization. The noise is added to every
// coordinate, structural ones included.
inline std::vector<double> oracle_encode_raw(const SentenceRecord& record,
                                             std::size_t dim, double noise,
                                             std::uint64_t seed) {
  if (dim < kOracleMinDim)
    fail(ErrorCategory::kUsage, "oracle_encode: dim " + std::to_string(dim) +
                                    " too small for the structural block (need >= " +
                                    std::to_string(kOracleMinDim) + ")");
  const auto block = oracle_structural_block(record);
  std::vector<double> v(dim, 0.0);
  std::copy(block.begin(), block.end(), v.begin());
  if (noise != 0.0) {
    Rng rng(mix_seed({fnv1a64(record.id), seed, 0x0a11ceULL}));
    for (auto& x : v) x += noise * standard_normal(rng);
  }
  return v;
}

inline std::vector<float> oracle_encode(const SentenceRecord& record,
                                        std::size_t dim, double noise,
                                        std::uint64_t seed) {
  return normalized_float(oracle_encode_raw(record, dim, noise, seed));
}

// Sign-thresholded structural block of an encoded vector.
inline std::array<bool, kOracleBlockSize> oracle_decode_block(
    std::span<const float> v) {
  std::array<bool, kOracleBlockSize> bits{};
  for (std::size_t i = 0; i < kOracleBlockSize; ++i) bits[i] = v[i] > 0.0f;
  return bits;
}

// ---------------------------------------------------------------------------
// resolution of instances against a store

// Borrowed pointers into an EmbeddingStore; valid while the store lives.
struct InstanceView {
  std::array<const float*, kContextSize> context{};
  std::array<const float*, kAnswerCount> answers{};
  std::array<AnswerLabel, kAnswerCount> labels{};
  std::size_t correct = 0;
  Task task = Task::Agreement;
};

// Every referenced id must resolve; otherwise kData listing up to ten
// missing ids.
inline std::vector<InstanceView> resolve(const std::vector<BlmInstance>& instances,
                                         const EmbeddingStore& store) {
  std::vector<std::string> missing;
  std::size_t missing_total = 0;
  auto lookup = [&](const SentenceRecord& s) -> const float* {
    if (const auto* v = store.find(s.id)) return v->data();
    ++missing_total;
    if (missing.size() < 10 &&
        std::find(missing.begin(), missing.end(), s.id) == missing.end())
      missing.push_back(s.id);
    return nullptr;
  };
  std::vector<InstanceView> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    InstanceView v;
    v.task = inst.task;
    v.correct = inst.correct_index;
    for (std::size_t i = 0; i < kContextSize; ++i) v.context[i] = lookup(inst.context[i]);
    for (std::size_t i = 0; i < kAnswerCount; ++i) {
      v.answers[i] = lookup(inst.answers[i].sentence);
      v.labels[i] = inst.answers[i].label;
    }
    out.push_back(v);
  }
  if (missing_total != 0) {
    std::string msg = "embedding store is missing " + std::to_string(missing_total) +
                      " sentence reference(s); first ids:";
    for (const auto& id : missing) msg += " " + id;
    fail(ErrorCategory::kData, msg);
  }
  return out;
}

}  // namespace blm
