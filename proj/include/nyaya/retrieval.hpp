#pragma once

// Exact (flat) cosine-similarity index with deterministic top-k and a
// checksummed binary file format.
//
// File layout, all integers little-endian:
//   "NYIDX1" | u32 dimension | u64 count |
//   count x ( u32 id_len | id bytes | dimension x f32 ) | u32 CRC-32 of everything before it

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <zlib.h>

#include "nyaya/error.hpp"
#include "nyaya/gateway.hpp"

namespace nyaya {

struct Neighbor {
  std::string id;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

inline double l2_norm(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline EmbeddingVector normalize(const EmbeddingVector& v) {
  double n = l2_norm(v.values);
  if (!std::isfinite(n)) throw Error(Errc::InvalidRequest, "vector has non-finite components");
  if (n == 0.0) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  EmbeddingVector out{v.values};
  for (auto& x : out.values) x /= n;
  return out;
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(Errc::DimensionMismatch, std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
  }
  double na = l2_norm(a.values), nb = l2_norm(b.values);
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroVector, "cosine of a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

/// Unit-normalized vectors stored as 32-bit floats, iterated in insertion order.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw Error(Errc::InvalidRequest, "index dimension must be positive");
  }

  void add(std::string id, const EmbeddingVector& v) {
    if (v.dimension() != dimension_) {
      throw Error(Errc::DimensionMismatch,
                  id + ": expected " + std::to_string(dimension_) + ", got " + std::to_string(v.dimension()));
    }
    if (positions_.count(id)) throw Error(Errc::DuplicateId, id);
    auto unit = normalize(v);
    double norm2 = 0.0;
    for (double x : unit.values) {
      data_.push_back(static_cast<float>(x));
      norm2 += static_cast<double>(data_.back()) * data_.back();
    }
    norms_.push_back(std::sqrt(norm2));
    positions_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::span<const float> vector_at(std::size_t i) const noexcept {
    return {data_.data() + i * dimension_, dimension_};
  }

  /// Norm of the stored float vector; within float rounding of 1.
  double norm_at(std::size_t i) const noexcept { return norms_[i]; }

  std::optional<std::size_t> position(const std::string& id) const {
    auto it = positions_.find(id);
    if (it == positions_.end()) return std::nullopt;
    return it->second;
  }

  /// Stored (normalized) vector widened to double.
  std::optional<EmbeddingVector> find(const std::string& id) const {
    auto pos = position(id);
    if (!pos) return std::nullopt;
    auto v = vector_at(*pos);
    return EmbeddingVector{std::vector<double>(v.begin(), v.end())};
  }

  bool operator==(const VectorIndex& o) const {
    return dimension_ == o.dimension_ && ids_ == o.ids_ &&
           std::equal(data_.begin(), data_.end(), o.data_.begin(), o.data_.end(),
                      [](float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); });
  }

 private:
  friend VectorIndex load_index(const std::string& path);

  std::size_t dimension_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> positions_;
};

inline VectorIndex build_index(const std::vector<std::pair<std::string, EmbeddingVector>>& pairs, std::size_t dimension) {
  VectorIndex index(dimension);
  for (const auto& [id, v] : pairs) index.add(id, v);
  return index;
}

struct QueryOptions {
  std::optional<std::string> exclude_id;
  /// Optional extra filter (e.g. a decision-date cutoff); false drops the entry.
  std::function<bool(const std::string&)> allow;
};

/// Top min(k, available) entries by cosine similarity, descending; equal
/// similarities order by smaller id first.
inline std::vector<Neighbor> query_top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k,
                                         const QueryOptions& opt = {}) {
  if (k == 0) throw Error(Errc::InvalidRequest, "k must be >= 1");
  if (query.dimension() != index.dimension()) {
    throw Error(Errc::DimensionMismatch, "query dimension " + std::to_string(query.dimension()) + ", index " +
                                             std::to_string(index.dimension()));
  }
  auto q = normalize(query);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& id = index.ids()[i];
    if (opt.exclude_id && id == *opt.exclude_id) continue;
    if (opt.allow && !opt.allow(id)) continue;
    auto v = index.vector_at(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < v.size(); ++d) dot += q.values[d] * static_cast<double>(v[d]);
    scored.emplace_back(std::clamp(dot / index.norm_at(i), -1.0, 1.0), i);
  }
  if (scored.empty()) throw Error(Errc::EmptyIndex, "no entries left to rank");

  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return index.ids()[a.second] < index.ids()[b.second];
  };
  auto take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({index.ids()[scored[i].second], scored[i].first});
  return out;
}

// ---------------------------------------------------------------------------
// persistence

inline constexpr char kIndexMagic[6] = {'N', 'Y', 'I', 'D', 'X', '1'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large indexes
  std::size_t off = 0;
  while (off < bytes.size()) {
    auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::CorruptIndex, "unexpected end of data");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_index(const VectorIndex& index) {
  std::string out(kIndexMagic, sizeof kIndexMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(index.dimension()));
  detail::put_u64(out, index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& id = index.ids()[i];
    detail::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    for (float x : index.vector_at(i)) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  detail::put_u32(out, detail::crc32_of(out));
  return out;
}

inline void save_index(const VectorIndex& index, const std::string& path) {
  auto bytes = serialize_index(index);
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::IoFailure, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot replace " + path + ": " + ec.message());
}

inline VectorIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof kIndexMagic + 4 + 8 + 4) throw Error(Errc::CorruptIndex, path + ": file too short");
  if (std::memcmp(bytes.data(), kIndexMagic, sizeof kIndexMagic) != 0) throw Error(Errc::CorruptIndex, path + ": bad magic");
  std::string_view body(bytes.data(), bytes.size() - 4);
  detail::ByteReader trailer(std::string_view(bytes).substr(bytes.size() - 4));
  if (trailer.u32() != detail::crc32_of(body)) throw Error(Errc::CorruptIndex, path + ": checksum mismatch");

  detail::ByteReader r(body.substr(sizeof kIndexMagic));
  auto dimension = r.u32();
  if (dimension == 0) throw Error(Errc::CorruptIndex, path + ": zero dimension");
  auto count = r.u64();
  VectorIndex index(dimension);
  for (std::uint64_t n = 0; n < count; ++n) {
    std::string id(r.take(r.u32()));
    if (id.empty() || index.positions_.count(id)) throw Error(Errc::CorruptIndex, path + ": empty or duplicate id");
    double norm2 = 0.0;
    for (std::uint32_t d = 0; d < dimension; ++d) {
      float x = std::bit_cast<float>(r.u32());
      if (!std::isfinite(x)) throw Error(Errc::CorruptIndex, path + ": non-finite component");
      norm2 += static_cast<double>(x) * x;
      index.data_.push_back(x);
    }
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-5) throw Error(Errc::CorruptIndex, path + ": stored vector not unit norm");
    index.norms_.push_back(std::sqrt(norm2));
    index.positions_.emplace(id, index.ids_.size());
    index.ids_.push_back(std::move(id));
  }
  if (r.remaining() != 0) throw Error(Errc::CorruptIndex, path + ": trailing bytes");
  return index;
}

}  // namespace nyaya
