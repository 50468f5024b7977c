#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "flc/errors.hpp"
#include "flc/rng.hpp"
#include "flc/tensor.hpp"
#include "flc/transforms.hpp"

namespace flc {

// Sentinel for "no quantization": kept values travel as raw 32-bit floats.
inline constexpr int kRawBits = 255;

struct CodecSpec {
  TransformSpec transform;
  float s = 1.0f;    // subsample keep-fraction, in (0, 1]
  int q = kRawBits;  // quantization bits in 1..16, or kRawBits

  void validate() const {
    transform.validate();
    if (!(s > 0.0f) || s > 1.0f) throw std::invalid_argument("codec: s must be in (0,1]");
    if (q != kRawBits && (q < 1 || q > 16)) {
      throw std::invalid_argument("codec: q must be in 1..16 or raw");
    }
  }
};

// One tensor's lossy encoding. Everything needed to invert is in the
// header; the subsample index set and the transform's sign diagonal are
// both regenerated from `seed`.
struct CompressedTensor {
  TransformKind transform = TransformKind::Identity;
  std::uint64_t seed = 0;
  std::vector<std::size_t> shape;
  std::uint32_t padded_len = 0;
  std::uint32_t kept = 0;  // k = round(s * padded_len), min 1
  float s = 1.0f;
  int q = kRawBits;
  float w_min = 0.0f;
  float w_max = 0.0f;
  std::vector<std::uint8_t> codes;  // ceil(k*q/8) packed bytes, or k raw f32 (LE)
};

// k = round-half-up(s * n), at least 1. A fixed count keeps payload sizes
// deterministic.
inline std::size_t subsample_count(std::size_t n, float s) {
  std::size_t k = static_cast<std::size_t>(std::floor(static_cast<double>(s) * n + 0.5));
  return std::clamp<std::size_t>(k, 1, n);
}

namespace detail {

inline RngStream index_stream(std::uint64_t seed) { return derive_stream(seed, "sub"); }

inline std::vector<double> quant_levels(float w_min, float w_max, int q) {
  const int n_levels = 1 << q;
  const double range = static_cast<double>(w_max) - static_cast<double>(w_min);
  std::vector<double> levels(n_levels);
  for (int i = 0; i < n_levels; ++i) {
    // Round to f32 so encode probabilities refer to the exact values a
    // decoder will reconstruct.
    levels[i] = static_cast<float>(w_min + i * range / (n_levels - 1));
  }
  return levels;
}

inline void pack_code(std::vector<std::uint8_t>& out, std::size_t j, int q, std::uint32_t code) {
  for (int b = 0; b < q; ++b) {
    if ((code >> b) & 1u) {
      std::size_t p = j * static_cast<std::size_t>(q) + b;
      out[p >> 3] |= static_cast<std::uint8_t>(1u << (p & 7));
    }
  }
}

inline std::uint32_t unpack_code(std::span<const std::uint8_t> bytes, std::size_t j, int q) {
  std::uint32_t code = 0;
  for (int b = 0; b < q; ++b) {
    std::size_t p = j * static_cast<std::size_t>(q) + b;
    if (bytes[p >> 3] & (1u << (p & 7))) code |= 1u << b;
  }
  return code;
}

}  // namespace detail

// Keeps a seed-recoverable uniform subset of k = round(s*n) coefficients,
// scaled by 1/s so the zero-filled reconstruction is unbiased. Returns the
// kept values (in ascending index order) and k; only the values and the
// stream's seed need to travel.
inline std::pair<Tensor, std::uint32_t> subsample(const Tensor& v, float s, RngStream& stream) {
  if (!(s > 0.0f) || s > 1.0f) throw std::invalid_argument("subsample: s must be in (0,1]");
  if (v.rank() != 1 || v.size() == 0) throw std::invalid_argument("subsample: rank-1 input required");
  const std::size_t k = subsample_count(v.size(), s);
  std::vector<std::uint32_t> idx = sample_without_replacement(v.size(), k, stream);
  std::vector<float> kept(k);
  for (std::size_t i = 0; i < k; ++i) kept[i] = v.data[idx[i]] / s;
  return {Tensor::vec(std::move(kept)), static_cast<std::uint32_t>(k)};
}

struct QuantizeResult {
  std::vector<std::uint8_t> codes;
  float w_min = 0.0f;
  float w_max = 0.0f;
};

// Stochastic uniform quantization to 2^q levels spanning [w_min, w_max].
// Each element rounds to one of its two bracketing levels, taking the upper
// with probability (w - lo) / (hi - lo), one uniform draw per element in
// index order; the expectation equals the input. Codes are level indices
// packed little-endian, LSB first. A constant input degenerates to all-zero
// codes with no draws consumed.
inline QuantizeResult quantize(const Tensor& v, int q, RngStream& stream) {
  if (q < 1 || q > 16) throw std::invalid_argument("quantize: q must be in 1..16");
  if (v.rank() != 1 || v.size() == 0) throw std::invalid_argument("quantize: nonempty rank-1 input required");

  QuantizeResult r;
  const auto [min_it, max_it] = std::minmax_element(v.data.begin(), v.data.end());
  r.w_min = *min_it;
  r.w_max = *max_it;
  const std::size_t n = v.size();
  r.codes.assign((n * static_cast<std::size_t>(q) + 7) / 8, 0u);
  if (r.w_min == r.w_max) return r;

  const std::vector<double> levels = detail::quant_levels(r.w_min, r.w_max, q);
  const int top = (1 << q) - 1;
  const double step = (static_cast<double>(r.w_max) - static_cast<double>(r.w_min)) / top;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = v.data[j];
    int lo = static_cast<int>(std::floor((w - static_cast<double>(r.w_min)) / step));
    lo = std::clamp(lo, 0, top - 1);
    double p = (w - levels[lo]) / (levels[lo + 1] - levels[lo]);
    p = std::clamp(p, 0.0, 1.0);
    const std::uint32_t code =
        static_cast<std::uint32_t>(lo) + (stream.next_f64() < p ? 1u : 0u);
    detail::pack_code(r.codes, j, q, code);
  }
  return r;
}

// Maps packed codes back to their level values. Exact inverse of the
// packing; the i-th code becomes level L_i.
inline Tensor dequantize(std::span<const std::uint8_t> codes, int q, float w_min, float w_max,
                         std::size_t k) {
  if (q < 1 || q > 16) throw std::invalid_argument("dequantize: q must be in 1..16");
  if (w_min > w_max) throw CodecError("dequantize: w_min > w_max");
  const std::size_t need = (k * static_cast<std::size_t>(q) + 7) / 8;
  if (codes.size() != need) throw CodecError("dequantize: payload length mismatch");
  const std::vector<double> levels = detail::quant_levels(w_min, w_max, q);
  std::vector<float> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    out[j] = static_cast<float>(levels[detail::unpack_code(codes, j, q)]);
  }
  return Tensor::vec(std::move(out));
}

// Full lossy pipeline: flatten row-major, basis transform, subsample,
// quantize. The caller's stream supplies the stochastic-rounding draws;
// index selection and the sign diagonal derive from spec.transform.seed so
// the decoder can rebuild them.
inline CompressedTensor encode(const Tensor& t, const CodecSpec& spec, RngStream& stream) {
  spec.validate();
  if (t.size() == 0) throw std::invalid_argument("encode: empty tensor");
  if (t.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("encode: tensor too large for wire format");
  }

  CompressedTensor c;
  c.transform = spec.transform.kind;
  c.seed = spec.transform.seed;
  c.shape = t.shape;
  c.s = spec.s;
  c.q = spec.q;

  Tensor flat = Tensor::vec(t.data);
  Tensor coeffs;
  switch (spec.transform.kind) {
    case TransformKind::Identity:
      coeffs = std::move(flat);
      break;
    case TransformKind::Hadamard:
      coeffs = hadamard_forward(flat, spec.transform.seed);
      break;
    case TransformKind::Kashin:
      coeffs = kashin_encode(flat, spec.transform);
      break;
  }
  c.padded_len = static_cast<std::uint32_t>(coeffs.size());

  RngStream idx_stream = detail::index_stream(c.seed);
  auto [kept, k] = subsample(coeffs, spec.s, idx_stream);
  c.kept = k;

  if (spec.q == kRawBits) {
    const auto [min_it, max_it] = std::minmax_element(kept.data.begin(), kept.data.end());
    c.w_min = *min_it;
    c.w_max = *max_it;
    c.codes.resize(static_cast<std::size_t>(k) * 4);
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(kept.data[i]);
      for (int b = 0; b < 4; ++b) {
        c.codes[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
      }
    }
  } else {
    QuantizeResult qr = quantize(kept, spec.q, stream);
    c.w_min = qr.w_min;
    c.w_max = qr.w_max;
    c.codes = std::move(qr.codes);
  }
  return c;
}

// Inverse pipeline: dequantize, scatter to the seed-recovered indices,
// inverse transform, truncate, reshape. Yields a noisy (or, for lossless
// settings, exact) version of the original tensor.
inline Tensor decode(const CompressedTensor& c) {
  if (c.shape.empty()) throw CodecError("decode: empty shape");
  std::size_t flat_len = 1;
  for (std::size_t d : c.shape) {
    if (d == 0) throw CodecError("decode: zero dimension");
    flat_len *= d;
  }

  std::size_t expect_padded = flat_len;
  if (c.transform == TransformKind::Hadamard) {
    expect_padded = padded_len(flat_len, PadRule::NextPow2);
  } else if (c.transform == TransformKind::Kashin) {
    expect_padded = padded_len(flat_len, PadRule::Expand);
  }
  if (c.padded_len != expect_padded) throw CodecError("decode: padded length mismatch");
  if (c.kept != subsample_count(c.padded_len, c.s)) throw CodecError("decode: kept count mismatch");

  Tensor values;
  if (c.q == kRawBits) {
    if (c.codes.size() != static_cast<std::size_t>(c.kept) * 4) {
      throw CodecError("decode: raw payload length mismatch");
    }
    std::vector<float> raw(c.kept);
    for (std::size_t i = 0; i < c.kept; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(c.codes[i * 4 + b]) << (8 * b);
      }
      raw[i] = std::bit_cast<float>(bits);
      if (!std::isfinite(raw[i])) throw CodecError("decode: non-finite raw value");
    }
    values = Tensor::vec(std::move(raw));
  } else {
    values = dequantize(c.codes, c.q, c.w_min, c.w_max, c.kept);
  }

  RngStream idx_stream = detail::index_stream(c.seed);
  std::vector<std::uint32_t> idx = sample_without_replacement(c.padded_len, c.kept, idx_stream);
  std::vector<float> coeffs(c.padded_len, 0.0f);
  for (std::size_t i = 0; i < c.kept; ++i) coeffs[idx[i]] = values.data[i];

  Tensor flat;
  switch (c.transform) {
    case TransformKind::Identity:
      flat = Tensor::vec(std::move(coeffs));
      break;
    case TransformKind::Hadamard:
      flat = hadamard_inverse(Tensor::vec(std::move(coeffs)), c.seed, flat_len);
      break;
    case TransformKind::Kashin:
      flat = kashin_decode(Tensor::vec(std::move(coeffs)), c.seed, flat_len);
      break;
    default:
      throw CodecError("decode: unknown transform");
  }
  return Tensor(c.shape, std::move(flat.data));
}

// ---------------------------------------------------------------------------
// Wire format (little-endian throughout):
//   magic "FLC1" | version u8=1 | transform u8 | q u8 (255 = raw) | ndim u8 |
//   dims u32 x ndim | padded_len u32 | kept u32 | s f32 | seed u64 |
//   w_min f32 | w_max f32 | payload bytes
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct ByteReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > bytes.size()) throw CodecError("parse: truncated at byte " + std::to_string(pos));
    return bytes[pos++];
  }
  std::uint32_t u32() {
    if (pos + 4 > bytes.size()) throw CodecError("parse: truncated at byte " + std::to_string(pos));
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    if (pos + 8 > bytes.size()) throw CodecError("parse: truncated at byte " + std::to_string(pos));
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * b);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace detail

inline std::size_t serialized_size(const CompressedTensor& c) {
  return 4 + 1 + 1 + 1 + 1 + 4 * c.shape.size() + 4 + 4 + 4 + 8 + 4 + 4 + c.codes.size();
}

inline std::vector<std::uint8_t> serialize(const CompressedTensor& c) {
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(c));
  out.insert(out.end(), {'F', 'L', 'C', '1'});
  detail::put_u8(out, 1);
  detail::put_u8(out, static_cast<std::uint8_t>(c.transform));
  detail::put_u8(out, static_cast<std::uint8_t>(c.q));
  detail::put_u8(out, static_cast<std::uint8_t>(c.shape.size()));
  for (std::size_t d : c.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
  detail::put_u32(out, c.padded_len);
  detail::put_u32(out, c.kept);
  detail::put_f32(out, c.s);
  detail::put_u64(out, c.seed);
  detail::put_f32(out, c.w_min);
  detail::put_f32(out, c.w_max);
  out.insert(out.end(), c.codes.begin(), c.codes.end());
  return out;
}

inline CompressedTensor parse(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in{bytes};
  if (in.u8() != 'F' || in.u8() != 'L' || in.u8() != 'C' || in.u8() != '1') {
    throw CodecError("parse: bad magic");
  }
  if (in.u8() != 1) throw CodecError("parse: unsupported version");

  CompressedTensor c;
  const std::uint8_t kind = in.u8();
  if (kind > 2) throw CodecError("parse: unknown transform id");
  c.transform = static_cast<TransformKind>(kind);
  const std::uint8_t q = in.u8();
  if (q != kRawBits && (q < 1 || q > 16)) throw CodecError("parse: bad quantization bits");
  c.q = q;
  const std::uint8_t ndim = in.u8();
  if (ndim == 0) throw CodecError("parse: zero-rank shape");
  c.shape.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    c.shape[i] = in.u32();
    if (c.shape[i] == 0) throw CodecError("parse: zero dimension");
  }
  c.padded_len = in.u32();
  c.kept = in.u32();
  c.s = in.f32();
  c.seed = in.u64();
  c.w_min = in.f32();
  c.w_max = in.f32();

  if (!(c.s > 0.0f) || c.s > 1.0f || !std::isfinite(c.s)) throw CodecError("parse: bad keep fraction");
  if (c.kept == 0 || c.kept > c.padded_len) throw CodecError("parse: bad kept count");
  if (!std::isfinite(c.w_min) || !std::isfinite(c.w_max) || c.w_min > c.w_max) {
    throw CodecError("parse: bad quantization range");
  }
  const std::size_t payload = (c.q == kRawBits)
                                  ? static_cast<std::size_t>(c.kept) * 4
                                  : (static_cast<std::size_t>(c.kept) * c.q + 7) / 8;
  if (bytes.size() - in.pos != payload) {
    throw CodecError("parse: payload length mismatch at byte " + std::to_string(in.pos));
  }
  c.codes.assign(bytes.begin() + in.pos, bytes.end());
  if (c.q != kRawBits) {
    // Trailing padding bits in the last payload byte must be zero.
    const std::size_t used_bits = static_cast<std::size_t>(c.kept) * c.q;
    if (used_bits % 8 != 0 && !c.codes.empty()) {
      const std::uint8_t mask = static_cast<std::uint8_t>(0xFFu << (used_bits % 8));
      if (c.codes.back() & mask) throw CodecError("parse: nonzero padding bits");
    }
  }
  return c;
}

}  // namespace flc
