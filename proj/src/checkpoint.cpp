#include "qifsnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

namespace qifsnn {

namespace {

constexpr std::string_view kMagic = "QSNNCKPT";
constexpr std::uint32_t kVersion = 1;

void put(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::TruncatedData, "checkpoint ends unexpectedly");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(std::span<const NamedTensor> tensors, StorageType type) {
  std::string out(kMagic);
  put(out, kVersion, 4);
  put(out, tensors.size(), 4);
  for (const auto& nt : tensors) {
    put(out, nt.name.size(), 4);
    out += nt.name;
    out += static_cast<char>(type);
    put(out, nt.tensor.rank(), 4);
    for (auto d : nt.tensor.shape()) put(out, d, 8);
    for (double v : nt.tensor.values()) {
      if (type == StorageType::F64) {
        put(out, std::bit_cast<std::uint64_t>(v), 8);
      } else {
        put(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
      }
    }
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw Error(ErrorKind::MalformedHeader, "not a checkpoint file");
  if (const auto version = r.get(4); version != kVersion) {
    throw Error(ErrorKind::MalformedHeader, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get(4);
  std::vector<NamedTensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor nt;
    nt.name = std::string(r.take(r.get(4)));
    const auto type = static_cast<StorageType>(r.get(1));
    if (type != StorageType::F64 && type != StorageType::F32) {
      throw Error(ErrorKind::MalformedHeader, "unknown dtype for tensor " + nt.name);
    }
    Shape shape(r.get(4));
    for (auto& d : shape) d = r.get(8);
    std::vector<double> values(element_count(shape));
    for (auto& v : values) {
      v = type == StorageType::F64 ? std::bit_cast<double>(r.get(8))
                                   : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(r.get(4))));
    }
    nt.tensor = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(nt));
  }
  if (!r.done()) throw Error(ErrorKind::MalformedHeader, "trailing bytes after checkpoint");
  return out;
}

std::vector<NamedTensor> snapshot(Network& net) {
  std::vector<NamedTensor> out;
  for (const auto& s : net.state()) {
    out.push_back({s.name, Tensor(s.shape, std::vector<double>(s.value.begin(), s.value.end()))});
  }
  return out;
}

void restore(Network& net, std::span<const NamedTensor> tensors) {
  auto state = net.state();
  if (state.size() != tensors.size()) {
    throw Error(ErrorKind::CheckpointMismatch, "checkpoint holds " + std::to_string(tensors.size()) +
                                                   " tensors, network expects " + std::to_string(state.size()));
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i].name != tensors[i].name || state[i].shape != tensors[i].tensor.shape()) {
      throw Error(ErrorKind::CheckpointMismatch,
                  "tensor " + std::to_string(i) + ": network has " + state[i].name + shape_string(state[i].shape) +
                      ", checkpoint has " + tensors[i].name + shape_string(tensors[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    std::copy(tensors[i].tensor.values().begin(), tensors[i].tensor.values().end(), state[i].value.begin());
  }
  for (Layer* l : net.layers()) {
    if (l->kind() == LayerKind::Tdbn) static_cast<TdbnLayer*>(l)->params.stats_tracked = true;
  }
}

void save_checkpoint(const std::filesystem::path& path, Network& net) {
  write_file_atomic(path, encode_checkpoint(snapshot(net)));
}

void load_checkpoint(const std::filesystem::path& path, Network& net) {
  restore(net, decode_checkpoint(read_file(path)));
}

}  // namespace qifsnn
