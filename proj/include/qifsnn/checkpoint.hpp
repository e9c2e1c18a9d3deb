#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qifsnn/network.hpp"

namespace qifsnn {

// Flat binary checkpoint, all integers little-endian:
//
//   "QSNNCKPT"            8-byte magic
//   u32 version (1)
//   u32 tensor count
//   per tensor:
//     u32 name length, name bytes
//     u8  dtype (0 = f64, 1 = f32)
//     u32 rank, u64 dims[rank]
//     raw little-endian values
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

enum class StorageType : unsigned char { F64 = 0, F32 = 1 };

std::string encode_checkpoint(std::span<const NamedTensor> tensors, StorageType type = StorageType::F64);
std::vector<NamedTensor> decode_checkpoint(std::string_view bytes);

std::vector<NamedTensor> snapshot(Network& net);
// Throws CheckpointMismatch if names, order or shapes differ from the network.
void restore(Network& net, std::span<const NamedTensor> tensors);

void save_checkpoint(const std::filesystem::path& path, Network& net);
void load_checkpoint(const std::filesystem::path& path, Network& net);

}  // namespace qifsnn
