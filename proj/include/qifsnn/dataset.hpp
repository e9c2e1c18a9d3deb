#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qifsnn/tensor.hpp"

namespace qifsnn {

struct Dataset {
  Tensor inputs;  // (N, sample...)
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  Shape sample_shape() const;
  // Gathers the given rows into a batch.
  Tensor batch(std::span<const std::size_t> rows) const;
  std::vector<int> batch_labels(std::span<const std::size_t> rows) const;
};

struct DatasetHandle {
  Dataset train;
  Dataset test;
  // Standardisation applied to both splits, fitted on train. One entry per
  // feature, or a single entry when statistics are global.
  std::vector<double> mean;
  std::vector<double> stddev;
};

// --- IDX: big-endian magic {0, 0, dtype, ndim}, ndim u32 sizes, raw data.

enum class IdxType : std::uint8_t {
  U8 = 0x08,
  I8 = 0x09,
  I16 = 0x0B,
  I32 = 0x0C,
  F32 = 0x0D,
  F64 = 0x0E,
};

struct IdxArray {
  IdxType type = IdxType::U8;
  Shape dims;
  std::vector<double> values;
};

IdxArray parse_idx(std::string_view bytes);
IdxArray read_idx(const std::filesystem::path& path);
std::string encode_idx_u8(const Shape& dims, std::span<const std::uint8_t> data);

// Images are (N, H, W) or (N, D); labels (N). Pixel values are scaled by
// 1/255 for u8 data and standardised with global train statistics.
DatasetHandle load_idx_dataset(const std::filesystem::path& train_images,
                               const std::filesystem::path& train_labels,
                               const std::filesystem::path& test_images,
                               const std::filesystem::path& test_labels);

struct BlobOptions {
  std::size_t classes = 3;
  std::size_t per_class = 200;
  std::size_t dim = 8;
  double separation = 5.0;  // distance between class centres, in units of the noise sigma
  double test_fraction = 0.25;

  bool operator==(const BlobOptions&) const = default;
};

// Isotropic unit-variance Gaussian clusters; centre k sits at
// (separation / sqrt 2) e_k so every pair of centres is `separation` apart.
DatasetHandle generate_blobs(const BlobOptions& opts, std::uint64_t seed);

// Fraction of `data` assigned to the nearest class centroid of `reference`.
double nearest_centroid_accuracy(const Dataset& reference, const Dataset& data);

}  // namespace qifsnn
