#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flc/rng.hpp"
#include "flc/tensor.hpp"

namespace flc {

// One fully-connected layer: weights [d_in x d_out] plus bias [d_out].
struct Layer {
  Tensor W;
  Tensor b;
};

// Fully-connected classifier parameters: ReLU on hidden layers, softmax
// (fused into the loss) at the output. Adjacent layer dims must chain.
struct ModelParams {
  std::vector<Layer> layers;

  std::vector<std::size_t> arch() const {
    std::vector<std::size_t> widths;
    if (layers.empty()) return widths;
    widths.push_back(layers.front().W.shape[0]);
    for (const Layer& l : layers) widths.push_back(l.W.shape[1]);
    return widths;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.W.size() + l.b.size();
    return n;
  }

  std::size_t num_classes() const { return layers.back().W.shape[1]; }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("model: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].W.rank() != 2 || layers[l].b.rank() != 1 ||
          layers[l].b.size() != layers[l].W.shape[1]) {
        throw std::invalid_argument("model: bad layer shapes");
      }
      if (l > 0 && layers[l].W.shape[0] != layers[l - 1].W.shape[1]) {
        throw std::invalid_argument("model: layer dims do not chain");
      }
    }
  }
};

// Labeled feature vectors, stored as one row-major block.
struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<float> features;  // size() x dim
  std::vector<std::uint16_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> feature(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
};

// A contiguous view of one training batch.
struct Batch {
  const float* x = nullptr;  // n x dim
  const std::uint16_t* y = nullptr;
  std::size_t n = 0;
  std::size_t dim = 0;
};

struct ForwardCache {
  // act[0] is the input batch, act[l] the post-ReLU output of layer l;
  // the final entry holds raw logits (softmax is fused into the loss).
  std::vector<std::vector<float>> act;
};

namespace detail {

// C[n x p] = A[n x m] * B[m x p] (+ bias row), accumulated in 64-bit.
inline void matmul_bias(const float* A, const float* B, const float* bias, float* C,
                        std::size_t n, std::size_t m, std::size_t p) {
  std::vector<double> row(p);
  for (std::size_t i = 0; i < n; ++i) {
    if (bias) {
      for (std::size_t j = 0; j < p; ++j) row[j] = bias[j];
    } else {
      std::fill(row.begin(), row.end(), 0.0);
    }
    const float* a = A + i * m;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a[k];
      if (aik == 0.0) continue;
      const float* brow = B + k * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
    }
    float* c = C + i * p;
    for (std::size_t j = 0; j < p; ++j) c[j] = static_cast<float>(row[j]);
  }
}

// Row-wise softmax with max subtraction, in doubles.
inline std::vector<double> softmax_rows(std::span<const float> logits, std::size_t n,
                                        std::size_t c) {
  std::vector<double> probs(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    const float* z = logits.data() + i * c;
    double zmax = z[0];
    for (std::size_t j = 1; j < c; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(static_cast<double>(z[j]) - zmax);
      sum += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= sum;
  }
  return probs;
}

}  // namespace detail

// Glorot-uniform weights from the pinned stream, biases zero. Same (arch,
// stream state) always produces identical parameters.
inline ModelParams init_params(std::span<const std::size_t> arch, RngStream& stream) {
  if (arch.size() < 2) throw std::invalid_argument("init_params: need at least two widths");
  ModelParams params;
  for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
    const std::size_t d_in = arch[l];
    const std::size_t d_out = arch[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    std::vector<float> w(d_in * d_out);
    for (float& x : w) {
      x = static_cast<float>(-bound + stream.next_f64() * 2.0 * bound);
    }
    params.layers.push_back(
        {Tensor({d_in, d_out}, std::move(w)), Tensor::zeros({d_out})});
  }
  return params;
}

// Affine/ReLU chain; returns raw logits [n x classes] and the activation
// cache needed by backward.
inline std::pair<Tensor, ForwardCache> forward(const ModelParams& params, const Batch& batch) {
  params.validate();
  if (batch.dim != params.layers.front().W.shape[0]) {
    throw std::invalid_argument("forward: batch width does not match model input");
  }
  ForwardCache cache;
  cache.act.emplace_back(batch.x, batch.x + batch.n * batch.dim);
  const std::size_t L = params.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const Layer& layer = params.layers[l];
    const std::size_t m = layer.W.shape[0];
    const std::size_t p = layer.W.shape[1];
    std::vector<float> out(batch.n * p);
    detail::matmul_bias(cache.act.back().data(), layer.W.data.data(), layer.b.data.data(),
                        out.data(), batch.n, m, p);
    if (l + 1 < L) {
      for (float& v : out) v = std::max(v, 0.0f);
    }
    cache.act.push_back(std::move(out));
  }
  Tensor logits({batch.n, params.num_classes()}, cache.act.back());
  return {std::move(logits), std::move(cache)};
}

// Mean cross-entropy of logits against labels.
inline double mean_loss(const Tensor& logits, std::span<const std::uint16_t> labels) {
  const std::size_t n = logits.shape[0];
  const std::size_t c = logits.shape[1];
  const std::vector<double> probs = detail::softmax_rows(logits.data, n, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss -= std::log(std::max(probs[i * c + labels[i]], 1e-300));
  }
  return loss / static_cast<double>(n);
}

// Exact gradient of the mean cross-entropy loss, same shapes as params.
// All reductions accumulate in 64-bit before rounding to f32.
inline ModelParams backward(const ModelParams& params, const Batch& batch,
                            const ForwardCache& cache) {
  const std::size_t L = params.layers.size();
  if (cache.act.size() != L + 1 || cache.act[0].size() != batch.n * batch.dim) {
    throw std::invalid_argument("backward: cache does not match batch");
  }
  const std::size_t n = batch.n;
  const std::size_t c = params.num_classes();

  // dL/dz at the output: (softmax - onehot) / n.
  const std::vector<double> probs = detail::softmax_rows(cache.act.back(), n, c);
  std::vector<float> dz(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double g = probs[i * c + j];
      if (j == batch.y[i]) g -= 1.0;
      dz[i * c + j] = static_cast<float>(g / static_cast<double>(n));
    }
  }

  ModelParams grad;
  grad.layers.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    const Layer& layer = params.layers[l];
    const std::size_t d_in = layer.W.shape[0];
    const std::size_t d_out = layer.W.shape[1];
    const std::vector<float>& a_prev = cache.act[l];

    std::vector<double> dw(d_in * d_out, 0.0);
    std::vector<double> db(d_out, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const float* dzi = dz.data() + i * d_out;
      const float* ai = a_prev.data() + i * d_in;
      for (std::size_t j = 0; j < d_out; ++j) db[j] += dzi[j];
      for (std::size_t k = 0; k < d_in; ++k) {
        const double aik = ai[k];
        if (aik == 0.0) continue;
        double* dwrow = dw.data() + k * d_out;
        for (std::size_t j = 0; j < d_out; ++j) dwrow[j] += aik * dzi[j];
      }
    }
    std::vector<float> dwf(dw.begin(), dw.end());
    std::vector<float> dbf(db.begin(), db.end());
    grad.layers[l] = {Tensor({d_in, d_out}, std::move(dwf)), Tensor({d_out}, std::move(dbf))};

    if (l > 0) {
      // da = dz * W^T, masked by ReLU activity of the previous layer.
      std::vector<float> dprev(n * d_in);
      for (std::size_t i = 0; i < n; ++i) {
        const float* dzi = dz.data() + i * d_out;
        const float* ai = a_prev.data() + i * d_in;
        float* dpi = dprev.data() + i * d_in;
        for (std::size_t k = 0; k < d_in; ++k) {
          if (ai[k] <= 0.0f) {
            dpi[k] = 0.0f;
            continue;
          }
          const float* wrow = layer.W.data.data() + k * d_out;
          double s = 0.0;
          for (std::size_t j = 0; j < d_out; ++j) s += static_cast<double>(dzi[j]) * wrow[j];
          dpi[k] = static_cast<float>(s);
        }
      }
      dz = std::move(dprev);
    }
  }
  return grad;
}

// Plain SGD: per-epoch seeded shuffle, sequential mini-batches (the final
// batch may be short; its loss is averaged over its true size). Returns the
// trained parameters and the sample count used for federated weighting.
inline std::pair<ModelParams, std::size_t> local_train(ModelParams params, const Dataset& data,
                                                       int epochs, int batch_size, float lr,
                                                       RngStream& stream) {
  if (!(lr >= 0.0f)) throw std::invalid_argument("local_train: lr must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("local_train: batch_size must be >= 1");
  if (data.size() == 0) throw std::invalid_argument("local_train: empty dataset");
  params.validate();

  std::vector<std::uint32_t> order(data.size());
  std::iota(order.begin(), order.end(), 0u);
  std::vector<float> bx;
  std::vector<std::uint16_t> by;
  const double lr_d = lr;

  for (int e = 0; e < epochs; ++e) {
    shuffle(std::span<std::uint32_t>(order), stream);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t nb = std::min<std::size_t>(batch_size, order.size() - start);
      bx.resize(nb * data.dim);
      by.resize(nb);
      for (std::size_t i = 0; i < nb; ++i) {
        const auto f = data.feature(order[start + i]);
        std::copy(f.begin(), f.end(), bx.begin() + i * data.dim);
        by[i] = data.labels[order[start + i]];
      }
      Batch batch{bx.data(), by.data(), nb, data.dim};
      auto [logits, cache] = forward(params, batch);
      ModelParams grad = backward(params, batch, cache);
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        float* w = params.layers[l].W.data.data();
        const float* gw = grad.layers[l].W.data.data();
        const std::size_t nw = params.layers[l].W.size();
        for (std::size_t i = 0; i < nw; ++i) {
          w[i] = static_cast<float>(static_cast<double>(w[i]) - lr_d * gw[i]);
        }
        float* b = params.layers[l].b.data.data();
        const float* gb = grad.layers[l].b.data.data();
        for (std::size_t i = 0; i < params.layers[l].b.size(); ++i) {
          b[i] = static_cast<float>(static_cast<double>(b[i]) - lr_d * gb[i]);
        }
      }
    }
  }
  return {std::move(params), data.size()};
}

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Argmax classification accuracy and mean cross-entropy. Ties break toward
// the lower class index.
inline EvalResult evaluate(const ModelParams& params, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const std::size_t c = params.num_classes();
  const std::size_t chunk = 256;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t n = std::min(chunk, data.size() - start);
    Batch batch{data.features.data() + start * data.dim, data.labels.data() + start, n, data.dim};
    auto [logits, cache] = forward(params, batch);
    const std::vector<double> probs = detail::softmax_rows(logits.data, n, c);
    for (std::size_t i = 0; i < n; ++i) {
      const float* z = logits.data.data() + i * c;
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j) {
        if (z[j] > z[best]) best = j;
      }
      if (best == data.labels[start + i]) ++correct;
      loss -= std::log(std::max(probs[i * c + data.labels[start + i]], 1e-300));
    }
  }
  return {static_cast<double>(correct) / data.size(), loss / data.size()};
}

}  // namespace flc
