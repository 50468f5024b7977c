#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "flc/errors.hpp"
#include "flc/model.hpp"

namespace flc {

// IDX container: 4-byte magic (0x00 0x00 <type> <ndim>), big-endian u32
// dims, then the payload. Only unsigned-byte data (type 0x08) is supported.
struct IdxFile {
  std::array<std::uint8_t, 4> magic{};
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

inline IdxFile read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < 4) {
    throw DataError("idx: " + path + ": truncated header, " + std::to_string(bytes.size()) +
                    " bytes before offset 4");
  }
  IdxFile f;
  std::copy(bytes.begin(), bytes.begin() + 4, f.magic.begin());
  if (f.magic[0] != 0 || f.magic[1] != 0) {
    throw DataError("idx: " + path + ": bad magic at offset 0");
  }
  if (f.magic[2] != 0x08) {
    throw DataError("idx: " + path + ": unsupported type byte at offset 2 (want 0x08)");
  }
  const std::size_t ndim = f.magic[3];
  if (ndim == 0) throw DataError("idx: " + path + ": zero dimensions at offset 3");
  const std::size_t header = 4 + 4 * ndim;
  if (bytes.size() < header) {
    throw DataError("idx: " + path + ": truncated dims, file ends at offset " +
                    std::to_string(bytes.size()) + " before " + std::to_string(header));
  }
  std::size_t count = 1;
  f.dims.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v = (v << 8) | bytes[4 + 4 * i + b];
    f.dims[i] = v;
    if (v == 0) throw DataError("idx: " + path + ": zero dim at offset " + std::to_string(4 + 4 * i));
    if (count > (std::size_t(1) << 40) / std::max<std::size_t>(v, 1)) {
      throw DataError("idx: " + path + ": dimensions overflow");
    }
    count *= v;
  }
  if (bytes.size() - header != count) {
    throw DataError("idx: " + path + ": payload length mismatch at offset " +
                    std::to_string(header) + ": expected " + std::to_string(count) +
                    " bytes, found " + std::to_string(bytes.size() - header));
  }
  f.payload.assign(bytes.begin() + header, bytes.end());
  return f;
}

inline void write_idx(const std::string& path, std::span<const std::uint32_t> dims,
                      std::span<const std::uint8_t> payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("idx: cannot write " + path);
  const std::array<std::uint8_t, 4> magic{0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
  out.write(reinterpret_cast<const char*>(magic.data()), 4);
  for (std::uint32_t d : dims) {
    const std::array<std::uint8_t, 4> be{static_cast<std::uint8_t>(d >> 24),
                                         static_cast<std::uint8_t>(d >> 16),
                                         static_cast<std::uint8_t>(d >> 8),
                                         static_cast<std::uint8_t>(d)};
    out.write(reinterpret_cast<const char*>(be.data()), 4);
  }
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
}

// Loads an images/labels pair (images: 3 dims count x rows x cols, labels:
// 1 dim) into a Dataset with pixels scaled to [0, 1] by /255.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  IdxFile images = read_idx(images_path);
  if (images.dims.size() != 3) {
    throw DataError("idx: " + images_path + ": bad magic: want 3-dimensional images (0x00000803)");
  }
  IdxFile labels = read_idx(labels_path);
  if (labels.dims.size() != 1) {
    throw DataError("idx: " + labels_path + ": bad magic: want 1-dimensional labels (0x00000801)");
  }
  if (images.dims[0] != labels.dims[0]) {
    throw DataError("idx: image count " + std::to_string(images.dims[0]) +
                    " does not match label count " + std::to_string(labels.dims[0]));
  }

  Dataset data;
  data.dim = static_cast<std::size_t>(images.dims[1]) * images.dims[2];
  data.features.resize(images.payload.size());
  for (std::size_t i = 0; i < images.payload.size(); ++i) {
    data.features[i] = static_cast<float>(images.payload[i]) / 255.0f;
  }
  data.labels.resize(labels.payload.size());
  std::uint16_t max_label = 0;
  for (std::size_t i = 0; i < labels.payload.size(); ++i) {
    data.labels[i] = labels.payload[i];
    max_label = std::max<std::uint16_t>(max_label, data.labels[i]);
  }
  data.num_classes = static_cast<std::size_t>(max_label) + 1;
  return data;
}

}  // namespace flc
