#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flc/codec.hpp"
#include "flc/model.hpp"

namespace flc {

struct CompareRow {
  CodecSpec spec;
  double l2_error = 0.0;          // L2 distance between original and round-tripped model
  std::optional<double> accuracy; // post-compression accuracy, if a hook was given
  std::size_t bytes = 0;          // compressed weight bytes + raw bias bytes
};

// Round-trips a trained model through each codec setting in the grid and
// reports the L2 damage and the compressed size. Weight matrices are
// compressed independently with per-matrix derived seeds; biases are never
// compressed. Accuracy evaluation is delegated to the caller's hook so this
// stays independent of any particular dataset.
inline std::vector<CompareRow> compare_representations(
    const ModelParams& model, std::span<const CodecSpec> grid,
    const std::function<double(const ModelParams&)>& accuracy_hook = nullptr) {
  model.validate();
  std::vector<CompareRow> rows;
  rows.reserve(grid.size());
  for (const CodecSpec& spec : grid) {
    spec.validate();
    CompareRow row;
    row.spec = spec;
    ModelParams decoded = model;
    double err2 = 0.0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      CodecSpec per_matrix = spec;
      per_matrix.transform.seed = derive_stream(spec.transform.seed, "cmp", l).next_u64();
      RngStream quant = derive_stream(spec.transform.seed, "cmpq", l);
      CompressedTensor ct = encode(model.layers[l].W, per_matrix, quant);
      row.bytes += serialized_size(ct) + 4 * model.layers[l].b.size();
      decoded.layers[l].W = decode(ct);
      const auto& a = model.layers[l].W.data;
      const auto& b = decoded.layers[l].W.data;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        err2 += d * d;
      }
    }
    row.l2_error = std::sqrt(err2);
    if (accuracy_hook) row.accuracy = accuracy_hook(decoded);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace flc
