#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qifsnn {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a master seed and a fixed label
// ("init", "shuffle", "monte-carlo", ...). Adding a new label never changes
// the streams of existing ones.
std::uint64_t substream_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
  return Rng(substream_seed(master, label, index));
}

}  // namespace qifsnn
