#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flc/model.hpp"
#include "flc/rng.hpp"

namespace flc {

// Gaussian-blob classification data: class c gets a mean at
// separation * (random unit vector), samples are mean + noise * N(0, I).
// Means depend only on (seed); sample noise additionally depends on
// (seed, split), so train (split 0) and test (split 1) sets share class
// geometry without sharing samples.
struct SyntheticSpec {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  std::size_t samples_per_class = 100;
  float separation = 3.0f;
  float noise = 1.0f;
  std::uint64_t seed = 0;
  std::uint64_t split = 0;

  void validate() const {
    if (num_classes < 2) throw std::invalid_argument("synthetic: need >= 2 classes");
    if (dim == 0 || samples_per_class == 0) throw std::invalid_argument("synthetic: zero size");
    if (!(separation > 0.0f)) throw std::invalid_argument("synthetic: separation must be > 0");
    if (noise < 0.0f) throw std::invalid_argument("synthetic: noise must be >= 0");
  }
};

namespace detail {

// Box-Muller, one value per pair of uniform draws.
inline double gaussian(RngStream& stream) {
  const double u1 = 1.0 - stream.next_f64();  // (0, 1]
  const double u2 = stream.next_f64();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace detail

inline Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  RngStream mean_stream = derive_stream(spec.seed, "means");
  std::vector<std::vector<float>> means(spec.num_classes);
  for (auto& m : means) {
    m.resize(spec.dim);
    double norm2 = 0.0;
    for (float& v : m) {
      const double g = detail::gaussian(mean_stream);
      v = static_cast<float>(g);
      norm2 += g * g;
    }
    const double scale = spec.separation / std::max(std::sqrt(norm2), 1e-12);
    for (float& v : m) v = static_cast<float>(v * scale);
  }

  Dataset data;
  data.dim = spec.dim;
  data.num_classes = spec.num_classes;
  data.features.reserve(spec.num_classes * spec.samples_per_class * spec.dim);
  data.labels.reserve(spec.num_classes * spec.samples_per_class);
  RngStream noise_stream = derive_stream(spec.seed, "samples", spec.split);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        data.features.push_back(static_cast<float>(
            means[c][j] + spec.noise * detail::gaussian(noise_stream)));
      }
      data.labels.push_back(static_cast<std::uint16_t>(c));
    }
  }
  return data;
}

}  // namespace flc
