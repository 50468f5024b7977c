#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flc/rng.hpp"

namespace flc {

// Dense row-major array of 32-bit reals with shape metadata. Rank 1 and 2
// carry model vectors and weight matrices; rank 4 appears only in the
// convolutional filter-index mapping. The shape/data agreement and
// finiteness invariants are checked on construction; in-place mutation of
// `data` afterwards is the caller's responsibility.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;

  Tensor(std::vector<std::size_t> shape_, std::vector<float> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw std::invalid_argument("tensor: zero dimension");
      n *= d;
    }
    if (n != data.size()) throw std::invalid_argument("tensor: shape/data length mismatch");
    for (float v : data) {
      if (!std::isfinite(v)) throw std::invalid_argument("tensor: non-finite entry");
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape_) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    Tensor t;
    t.shape = std::move(shape_);
    t.data.assign(n, 0.0f);
    return t;
  }

  static Tensor vec(std::vector<float> values) {
    return Tensor({values.size()}, std::move(values));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Rank-2 accessors (row-major).
  float& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

inline double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Zero-padding rule for power-of-two transforms. NextPow2 pads to the
// smallest power of two >= d. Expand additionally doubles a length that is
// already a power of two, so the redundant representation always has room
// to spread coefficients.
enum class PadRule { NextPow2, Expand };

inline std::size_t padded_len(std::size_t d, PadRule rule) {
  std::size_t p = std::bit_ceil(d);
  if (rule == PadRule::Expand && p == d) p *= 2;
  return p;
}

// Pads a rank-1 tensor with zeros per the rule; returns the padded vector
// and the original length. Truncating back to original_len recovers the
// input exactly.
inline std::pair<Tensor, std::size_t> pad_pow2(const Tensor& v, PadRule rule) {
  if (v.rank() != 1) throw std::invalid_argument("pad_pow2: rank-1 input required");
  std::size_t d = v.size();
  if (d == 0) throw std::invalid_argument("pad_pow2: empty input");
  std::vector<float> out(padded_len(d, rule), 0.0f);
  std::copy(v.data.begin(), v.data.end(), out.begin());
  return {Tensor::vec(std::move(out)), d};
}

// Length-n vector of +/-1 signs, one sign per PRNG draw (top bit of
// next_u64; set bit means -1).
inline Tensor rademacher(RngStream& stream, std::size_t n) {
  if (n == 0) throw std::invalid_argument("rademacher: n must be >= 1");
  std::vector<float> signs(n);
  for (std::size_t i = 0; i < n; ++i) {
    signs[i] = (stream.next_u64() >> 63) ? -1.0f : 1.0f;
  }
  return Tensor::vec(std::move(signs));
}

}  // namespace flc
