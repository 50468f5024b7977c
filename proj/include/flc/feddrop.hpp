#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flc/codec.hpp"
#include "flc/model.hpp"
#include "flc/rng.hpp"
#include "flc/tensor.hpp"

namespace flc {

// Number of units kept at a dropout rate: round-half-up, at least one.
inline std::size_t kept_count(std::size_t width, float rate) {
  std::size_t k = static_cast<std::size_t>(std::floor(static_cast<double>(rate) * width + 0.5));
  return std::clamp<std::size_t>(k, 1, width);
}

// Per-client sub-model description: for every activation layer of the
// architecture, the sorted global indices of the units the sub-model keeps.
// Input and logits layers always keep everything; hidden layers keep a
// fixed, seed-recoverable subset. (round, client) record which derived
// stream produced the plan.
struct DropoutPlan {
  float rate = 1.0f;
  std::vector<std::vector<std::uint32_t>> kept;  // one entry per arch width
  std::uint64_t round = 0;
  std::uint64_t client = 0;

  std::vector<std::size_t> sub_arch() const {
    std::vector<std::size_t> widths(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) widths[i] = kept[i].size();
    return widths;
  }
};

inline std::vector<std::uint32_t> full_range(std::size_t n) {
  std::vector<std::uint32_t> r(n);
  std::iota(r.begin(), r.end(), 0u);
  return r;
}

// Samples round(rate * width) kept units per hidden layer, uniformly
// without replacement, sorted ascending. The bias of a kept unit travels
// with it; the bias pathway itself is never masked.
inline DropoutPlan make_plan(std::span<const std::size_t> arch, float rate, RngStream& stream) {
  if (!(rate > 0.0f) || rate > 1.0f) throw std::invalid_argument("make_plan: rate must be in (0,1]");
  if (arch.size() < 2) throw std::invalid_argument("make_plan: need at least two widths");
  DropoutPlan plan;
  plan.rate = rate;
  plan.kept.resize(arch.size());
  plan.kept.front() = full_range(arch.front());
  plan.kept.back() = full_range(arch.back());
  for (std::size_t l = 1; l + 1 < arch.size(); ++l) {
    plan.kept[l] = sample_without_replacement(arch[l], kept_count(arch[l], rate), stream);
  }
  return plan;
}

// A dense re-packing of the global model restricted to a plan's kept
// units; trainable as an ordinary smaller network.
struct SubModel {
  ModelParams params;
  DropoutPlan plan;
};

// W_sub[i][j] = W[kept_prev[i]][kept_cur[j]]; b_sub[j] = b[kept_cur[j]].
inline SubModel extract(const ModelParams& global, const DropoutPlan& plan) {
  global.validate();
  const auto arch = global.arch();
  if (plan.kept.size() != arch.size()) throw std::invalid_argument("extract: plan/arch mismatch");
  for (std::size_t l = 0; l < arch.size(); ++l) {
    if (plan.kept[l].empty() || plan.kept[l].back() >= arch[l]) {
      throw std::invalid_argument("extract: kept index out of range");
    }
  }

  SubModel sub;
  sub.plan = plan;
  for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
    const auto& rows = plan.kept[l];
    const auto& cols = plan.kept[l + 1];
    const Tensor& W = global.layers[l].W;
    std::vector<float> w(rows.size() * cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        w[i * cols.size() + j] = W.at(rows[i], cols[j]);
      }
    }
    std::vector<float> b(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) b[j] = global.layers[l].b.data[cols[j]];
    sub.params.layers.push_back(
        {Tensor({rows.size(), cols.size()}, std::move(w)), Tensor({cols.size()}, std::move(b))});
  }
  return sub;
}

// A client update addressed in global coordinates. Only coordinates the
// plan covers are present; everything else is absent rather than zero.
struct SparseUpdate {
  struct LayerDelta {
    std::vector<std::uint32_t> rows;  // global row indices of dW entries
    std::vector<std::uint32_t> cols;  // global column indices
    std::vector<float> dW;            // rows.size() x cols.size(), row-major
    std::vector<float> db;            // cols.size()
  };
  std::vector<LayerDelta> layers;

  std::size_t coordinate_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.rows.size() * l.cols.size() + l.db.size();
    return n;
  }
};

// Maps a sub-model-shaped delta back to global coordinates through the
// plan. Each sub-coordinate lands on exactly one global coordinate.
inline SparseUpdate scatter_update(std::span<const std::size_t> global_arch,
                                   const DropoutPlan& plan, const ModelParams& delta) {
  if (plan.kept.size() != global_arch.size()) {
    throw std::invalid_argument("scatter_update: plan/arch mismatch");
  }
  if (delta.layers.size() + 1 != plan.kept.size()) {
    throw std::invalid_argument("scatter_update: delta layer count mismatch");
  }
  SparseUpdate update;
  for (std::size_t l = 0; l < delta.layers.size(); ++l) {
    const auto& rows = plan.kept[l];
    const auto& cols = plan.kept[l + 1];
    const Tensor& dW = delta.layers[l].W;
    const Tensor& db = delta.layers[l].b;
    if (dW.shape[0] != rows.size() || dW.shape[1] != cols.size() || db.size() != cols.size()) {
      throw std::invalid_argument("scatter_update: delta shape does not match plan");
    }
    update.layers.push_back({rows, cols, dW.data, db.data});
  }
  return update;
}

struct ClientUpdate {
  SparseUpdate update;
  std::size_t sample_count = 0;
};

// Per-coordinate sample-weighted averaging over the clients that cover
// each coordinate: new = old + sum(n_k * delta_k) / sum(n_k). Coordinates
// no client covers are left unchanged, so at rate 1 this is exactly
// FedAvg. Summation is in 64-bit; callers pass updates in ascending client
// order so the fold is deterministic.
inline ModelParams aggregate(const ModelParams& global, std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: need at least one update");
  ModelParams result = global;

  for (std::size_t l = 0; l < global.layers.size(); ++l) {
    const std::size_t d_in = global.layers[l].W.shape[0];
    const std::size_t d_out = global.layers[l].W.shape[1];
    std::vector<double> w_num(d_in * d_out, 0.0), w_den(d_in * d_out, 0.0);
    std::vector<double> b_num(d_out, 0.0), b_den(d_out, 0.0);

    for (const ClientUpdate& cu : updates) {
      if (cu.update.layers.size() != global.layers.size()) {
        throw std::invalid_argument("aggregate: update layer count mismatch");
      }
      const auto& ld = cu.update.layers[l];
      const double n = static_cast<double>(cu.sample_count);
      for (std::size_t i = 0; i < ld.rows.size(); ++i) {
        const std::size_t base = ld.rows[i] * d_out;
        for (std::size_t j = 0; j < ld.cols.size(); ++j) {
          const std::size_t g = base + ld.cols[j];
          w_num[g] += n * ld.dW[i * ld.cols.size() + j];
          w_den[g] += n;
        }
      }
      for (std::size_t j = 0; j < ld.cols.size(); ++j) {
        b_num[ld.cols[j]] += n * ld.db[j];
        b_den[ld.cols[j]] += n;
      }
    }

    float* w = result.layers[l].W.data.data();
    for (std::size_t g = 0; g < w_num.size(); ++g) {
      if (w_den[g] > 0.0) {
        w[g] = static_cast<float>(static_cast<double>(w[g]) + w_num[g] / w_den[g]);
      }
    }
    float* b = result.layers[l].b.data.data();
    for (std::size_t j = 0; j < d_out; ++j) {
      if (b_den[j] > 0.0) {
        b[j] = static_cast<float>(static_cast<double>(b[j]) + b_num[j] / b_den[j]);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Size / compute accounting
// ---------------------------------------------------------------------------

struct SavingsReport {
  std::size_t full_params = 0;
  std::size_t sub_params = 0;
  double param_ratio = 0.0;                // sub / full
  std::vector<double> layer_weight_ratio;  // per weight matrix, sub / full
  double downlink_ratio = 0.0;             // full 32-bit bytes / compressed sub bytes
  double uplink_ratio = 0.0;
  double flop_ratio = 0.0;  // full / sub training FLOPs per sample
};

namespace detail {

inline double bits_per_value(const CodecSpec& spec) {
  const double q = (spec.q == kRawBits) ? 32.0 : static_cast<double>(spec.q);
  return q * static_cast<double>(spec.s);
}

}  // namespace detail

// Idealized size and compute accounting for a dropout rate and a pair of
// codec settings. Baseline is the full model at 32 bits per parameter;
// compressed weights cost q*s bits per sub-model weight while biases always
// travel raw. The FLOP model charges a dense layer 2*d_in*d_out per sample
// forward and 4*d_in*d_out backward.
inline SavingsReport savings_report(std::span<const std::size_t> arch, float rate,
                                    const CodecSpec& down, const CodecSpec& up) {
  if (!(rate > 0.0f) || rate > 1.0f) throw std::invalid_argument("savings_report: bad rate");
  if (arch.size() < 2) throw std::invalid_argument("savings_report: need at least two widths");
  down.validate();
  up.validate();

  std::vector<std::size_t> sub(arch.begin(), arch.end());
  for (std::size_t l = 1; l + 1 < arch.size(); ++l) sub[l] = kept_count(arch[l], rate);

  SavingsReport r;
  double full_w = 0.0, sub_w = 0.0, full_b = 0.0, sub_b = 0.0;
  double full_flops = 0.0, sub_flops = 0.0;
  for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
    const double fw = static_cast<double>(arch[l]) * arch[l + 1];
    const double sw = static_cast<double>(sub[l]) * sub[l + 1];
    full_w += fw;
    sub_w += sw;
    full_b += static_cast<double>(arch[l + 1]);
    sub_b += static_cast<double>(sub[l + 1]);
    full_flops += 6.0 * fw;
    sub_flops += 6.0 * sw;
    r.layer_weight_ratio.push_back(sw / fw);
  }
  r.full_params = static_cast<std::size_t>(full_w + full_b);
  r.sub_params = static_cast<std::size_t>(sub_w + sub_b);
  r.param_ratio = (sub_w + sub_b) / (full_w + full_b);
  const double baseline_bits = 32.0 * (full_w + full_b);
  r.downlink_ratio = baseline_bits / (detail::bits_per_value(down) * sub_w + 32.0 * sub_b);
  r.uplink_ratio = baseline_bits / (detail::bits_per_value(up) * sub_w + 32.0 * sub_b);
  r.flop_ratio = full_flops / sub_flops;
  return r;
}

// ---------------------------------------------------------------------------
// Convolutional filter dropping: index mapping and accounting only (no conv
// training here). Filter banks are rank-4 tensors [kh, kw, in_ch, out_ch];
// dropping keeps a subset of output filters, and a chained layer also sees
// its input channels restricted to the previous layer's kept filters.
// ---------------------------------------------------------------------------

inline Tensor extract_filters(const Tensor& w, std::span<const std::uint32_t> kept_in,
                              std::span<const std::uint32_t> kept_out) {
  if (w.rank() != 4) throw std::invalid_argument("extract_filters: rank-4 tensor required");
  const std::size_t kh = w.shape[0], kw = w.shape[1], ci = w.shape[2], co = w.shape[3];
  for (auto i : kept_in)
    if (i >= ci) throw std::invalid_argument("extract_filters: in-channel out of range");
  for (auto o : kept_out)
    if (o >= co) throw std::invalid_argument("extract_filters: filter index out of range");

  std::vector<float> out(kh * kw * kept_in.size() * kept_out.size());
  std::size_t p = 0;
  for (std::size_t a = 0; a < kh; ++a) {
    for (std::size_t b = 0; b < kw; ++b) {
      for (std::uint32_t i : kept_in) {
        for (std::uint32_t o : kept_out) {
          out[p++] = w.data[((a * kw + b) * ci + i) * co + o];
        }
      }
    }
  }
  return Tensor({kh, kw, kept_in.size(), kept_out.size()}, std::move(out));
}

// Flat (global coordinate, value) pairs for a reduced filter-bank delta;
// the mapping is injective and covers exactly the kept cross terms.
inline std::vector<std::pair<std::size_t, float>> scatter_filters(
    const Tensor& delta, std::span<const std::size_t> full_shape,
    std::span<const std::uint32_t> kept_in, std::span<const std::uint32_t> kept_out) {
  if (delta.rank() != 4 || full_shape.size() != 4) {
    throw std::invalid_argument("scatter_filters: rank-4 shapes required");
  }
  if (delta.shape[0] != full_shape[0] || delta.shape[1] != full_shape[1] ||
      delta.shape[2] != kept_in.size() || delta.shape[3] != kept_out.size()) {
    throw std::invalid_argument("scatter_filters: delta shape does not match plan");
  }
  const std::size_t kh = full_shape[0], kw = full_shape[1], ci = full_shape[2],
                    co = full_shape[3];
  std::vector<std::pair<std::size_t, float>> out;
  out.reserve(delta.size());
  std::size_t p = 0;
  for (std::size_t a = 0; a < kh; ++a) {
    for (std::size_t b = 0; b < kw; ++b) {
      for (std::uint32_t i : kept_in) {
        for (std::uint32_t o : kept_out) {
          out.emplace_back(((a * kw + b) * ci + i) * co + o, delta.data[p++]);
        }
      }
    }
  }
  return out;
}

}  // namespace flc
