#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "flc/tensor.hpp"

namespace flc {

enum class TransformKind : std::uint8_t { Identity = 0, Hadamard = 1, Kashin = 2 };

struct TransformSpec {
  TransformKind kind = TransformKind::Identity;
  std::uint64_t seed = 0;
  int kashin_iters = 2;
  float kashin_eta = 1.0f;
  float kashin_delta = 1.0f;

  void validate() const {
    if (kashin_iters < 1) throw std::invalid_argument("transform: kashin_iters must be >= 1");
    if (!(kashin_eta > 0.0f)) throw std::invalid_argument("transform: kashin_eta must be > 0");
    if (!(kashin_delta > 0.0f)) throw std::invalid_argument("transform: kashin_delta must be > 0");
  }
};

// Monotone count of fwht invocations, used by cost-contract tests.
inline std::atomic<std::uint64_t> fwht_calls{0};

// In-place orthonormal Walsh-Hadamard transform (Sylvester ordering,
// normalized by 1/sqrt(n)). Butterfly recursion, O(n log n); self-inverse.
inline void fwht(std::span<float> v) {
  const std::size_t n = v.size();
  if (n == 0 || !std::has_single_bit(n)) {
    throw std::invalid_argument("fwht: length must be a power of two");
  }
  fwht_calls.fetch_add(1, std::memory_order_relaxed);
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += h * 2) {
      for (std::size_t j = i; j < i + h; ++j) {
        float x = v[j];
        float y = v[j + h];
        v[j] = x + y;
        v[j + h] = x - y;
      }
    }
  }
  const float norm = 1.0f / std::sqrt(static_cast<float>(n));
  for (float& x : v) x *= norm;
}

inline Tensor fwht(Tensor v) {
  if (v.rank() != 1) throw std::invalid_argument("fwht: rank-1 input required");
  fwht(std::span<float>(v.data));
  return v;
}

namespace detail {

// Rademacher diagonal for seed-recoverable randomized transforms.
inline std::vector<float> sign_diagonal(std::uint64_t seed, std::size_t n) {
  RngStream stream = derive_stream(seed, "diag");
  return rademacher(stream, n).data;
}

// Frame analysis: coefficients of x (zero-embedded into length n) under the
// randomized Hadamard frame, a = H * D * embed(x).
inline std::vector<float> hd_analysis(std::span<const float> x, std::span<const float> diag) {
  std::vector<float> a(diag.size(), 0.0f);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i] * diag[i];
  fwht(std::span<float>(a));
  return a;
}

// Frame synthesis: back to the original domain, truncated to length d,
// x = trunc_d(D * H * a). Analysis then synthesis is the identity.
inline std::vector<float> hd_synthesis(std::span<const float> a, std::span<const float> diag,
                                       std::size_t d) {
  std::vector<float> x(a.begin(), a.end());
  fwht(std::span<float>(x));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= diag[i];
  x.resize(d);
  return x;
}

}  // namespace detail

// Randomized Hadamard transform: pads to the next power of two, applies a
// seeded Rademacher diagonal, then the normalized Walsh-Hadamard transform.
// Orthonormal, so it spreads energy while preserving the L2 norm.
inline Tensor hadamard_forward(const Tensor& v, std::uint64_t seed) {
  if (v.rank() != 1) throw std::invalid_argument("hadamard_forward: rank-1 input required");
  if (v.size() == 0) throw std::invalid_argument("hadamard_forward: empty input");
  const std::size_t n = padded_len(v.size(), PadRule::NextPow2);
  std::vector<float> diag = detail::sign_diagonal(seed, n);
  return Tensor::vec(detail::hd_analysis(v.data, diag));
}

// Inverse of hadamard_forward; y must have the padded power-of-two length
// for original_len.
inline Tensor hadamard_inverse(const Tensor& y, std::uint64_t seed, std::size_t original_len) {
  if (y.rank() != 1) throw std::invalid_argument("hadamard_inverse: rank-1 input required");
  if (original_len == 0 || y.size() != padded_len(original_len, PadRule::NextPow2)) {
    throw std::invalid_argument("hadamard_inverse: length does not match recorded padding");
  }
  std::vector<float> diag = detail::sign_diagonal(seed, y.size());
  return Tensor::vec(detail::hd_synthesis(y.data, diag, original_len));
}

// Computes the redundant minimal-dynamic-range coefficient vector of v over
// the tight frame formed by the first d columns of H*D at expanded length
// D (strictly larger power of two). Each iteration computes frame
// coefficients, clips them to an L-infinity ball, and re-expresses the
// residual; the last iteration skips the clip, which makes the
// representation exact regardless of eta: synthesis returns v exactly up
// to float rounding.
inline Tensor kashin_encode(const Tensor& v, const TransformSpec& spec) {
  spec.validate();
  if (v.rank() != 1) throw std::invalid_argument("kashin_encode: rank-1 input required");
  const std::size_t d = v.size();
  if (d == 0) throw std::invalid_argument("kashin_encode: empty input");
  const std::size_t n = padded_len(d, PadRule::Expand);
  std::vector<float> diag = detail::sign_diagonal(spec.seed, n);

  std::vector<float> coeffs(n, 0.0f);
  std::vector<float> residual(v.data);
  double level = static_cast<double>(spec.kashin_eta) * l2_norm(v.data) /
                 std::sqrt(static_cast<double>(n));

  for (int it = 0; it < spec.kashin_iters - 1; ++it) {
    std::vector<float> a = detail::hd_analysis(residual, diag);
    const float lv = static_cast<float>(level);
    for (float& c : a) c = std::clamp(c, -lv, lv);
    for (std::size_t i = 0; i < n; ++i) coeffs[i] += a[i];
    std::vector<float> back = detail::hd_synthesis(a, diag, d);
    for (std::size_t i = 0; i < d; ++i) residual[i] -= back[i];
    level *= spec.kashin_delta;
  }
  // Exact final step: no clipping.
  std::vector<float> a = detail::hd_analysis(residual, diag);
  for (std::size_t i = 0; i < n; ++i) coeffs[i] += a[i];
  return Tensor::vec(std::move(coeffs));
}

// Frame synthesis of a Kashin coefficient vector back to length
// original_len.
inline Tensor kashin_decode(const Tensor& y, std::uint64_t seed, std::size_t original_len) {
  if (y.rank() != 1) throw std::invalid_argument("kashin_decode: rank-1 input required");
  if (original_len == 0 || y.size() != padded_len(original_len, PadRule::Expand)) {
    throw std::invalid_argument("kashin_decode: length does not match recorded padding");
  }
  std::vector<float> diag = detail::sign_diagonal(seed, y.size());
  return Tensor::vec(detail::hd_synthesis(y.data, diag, original_len));
}

}  // namespace flc
