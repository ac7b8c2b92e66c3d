#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "jointstruct/errors.hpp"
#include "jointstruct/model.hpp"

namespace jointstruct {

struct WeightVector {
  std::vector<double> values;

  static WeightVector zeros(const ModelSpec& spec) { return {std::vector<double>(spec.layout.total_dim, 0.0)}; }

  double* block(const FeatureBlock& b) { return values.data() + b.offset; }
  const double* block(const FeatureBlock& b) const { return values.data() + b.offset; }
  std::size_t size() const { return values.size(); }
};

namespace detail {

inline void put_u64(std::ofstream& f, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  f.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_u64(std::ifstream& f) {
  unsigned char buf[8];
  f.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint64_t double_bits(double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  return v;
}

inline double bits_double(std::uint64_t v) {
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

// Binary weights file, little-endian throughout:
//   magic "JSW1" | model_hash u64 | layout_checksum u64 | D u64 | D x f64
inline void save_weights(const std::string& path, const WeightVector& w, const ModelSpec& spec) {
  if (w.size() != spec.layout.total_dim)
    fail(ErrorCode::DimMismatch, "weight vector length does not match layout");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  f.write("JSW1", 4);
  detail::put_u64(f, model_hash(spec));
  detail::put_u64(f, layout_checksum(spec.layout));
  detail::put_u64(f, w.size());
  for (double v : w.values) detail::put_u64(f, detail::double_bits(v));
}

inline WeightVector load_weights(const std::string& path, const ModelSpec& spec) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "JSW1", 4) != 0) fail(ErrorCode::ParseError, "bad weights magic: " + path);
  if (detail::get_u64(f) != model_hash(spec))
    fail(ErrorCode::ParseError, "weights model hash does not match the supplied model");
  if (detail::get_u64(f) != layout_checksum(spec.layout))
    fail(ErrorCode::ParseError, "weights layout checksum mismatch");
  const std::uint64_t d = detail::get_u64(f);
  if (d != spec.layout.total_dim) fail(ErrorCode::DimMismatch, "weights dimension mismatch");
  WeightVector w;
  w.values.resize(d);
  for (auto& v : w.values) {
    v = detail::bits_double(detail::get_u64(f));
    if (!std::isfinite(v)) fail(ErrorCode::ParseError, "weights contain non-finite entries");
  }
  if (!f) fail(ErrorCode::ParseError, "truncated weights file: " + path);
  return w;
}

}  // namespace jointstruct
