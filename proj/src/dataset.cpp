#include "qifsnn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"
#include "qifsnn/rng.hpp"

namespace qifsnn {

namespace {

std::size_t idx_width(IdxType t) {
  switch (t) {
    case IdxType::U8:
    case IdxType::I8: return 1;
    case IdxType::I16: return 2;
    case IdxType::I32:
    case IdxType::F32: return 4;
    case IdxType::F64: return 8;
  }
  return 0;
}

std::uint64_t read_be(const unsigned char* p, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v = (v << 8) | p[i];
  return v;
}

double decode_value(IdxType t, const unsigned char* p) {
  switch (t) {
    case IdxType::U8: return p[0];
    case IdxType::I8: return static_cast<std::int8_t>(p[0]);
    case IdxType::I16: return static_cast<std::int16_t>(read_be(p, 2));
    case IdxType::I32: return static_cast<std::int32_t>(read_be(p, 4));
    case IdxType::F32: return std::bit_cast<float>(static_cast<std::uint32_t>(read_be(p, 4)));
    case IdxType::F64: return std::bit_cast<double>(read_be(p, 8));
  }
  return 0.0;
}

void standardize(Dataset& d, const std::vector<double>& mean, const std::vector<double>& sd) {
  const std::size_t per = d.inputs.row_size();
  for (std::size_t n = 0; n < d.size(); ++n) {
    auto row = d.inputs.row(n);
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t k = mean.size() == 1 ? 0 : j;
      row[j] = (row[j] - mean[k]) / sd[k];
    }
  }
}

Dataset images_to_dataset(const IdxArray& images, const IdxArray& labels, const std::string& which) {
  if (images.dims.size() != 2 && images.dims.size() != 3) {
    throw Error(ErrorKind::MalformedHeader, which + " images must be (N,H,W) or (N,D)");
  }
  if (labels.dims.size() != 1 || labels.dims[0] != images.dims[0]) {
    throw Error(ErrorKind::MalformedHeader, which + " labels do not match image count");
  }
  Dataset d;
  Shape shape = images.dims;
  if (shape.size() == 3) shape.insert(shape.begin() + 1, 1);  // single channel
  std::vector<double> values = images.values;
  if (images.type == IdxType::U8) {
    for (auto& v : values) v /= 255.0;
  }
  d.inputs = Tensor(shape, std::move(values));
  for (double l : labels.values) {
    if (l < 0 || l != std::floor(l)) throw Error(ErrorKind::MalformedHeader, which + " label " + format_double(l));
    d.labels.push_back(static_cast<int>(l));
  }
  return d;
}

}  // namespace

Shape Dataset::sample_shape() const {
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

Tensor Dataset::batch(std::span<const std::size_t> rows) const {
  Shape shape = inputs.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  const std::size_t per = inputs.row_size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = inputs.row(rows[i]);
    std::copy(src.begin(), src.end(), out.data() + i * per);
  }
  return out;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

IdxArray parse_idx(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4) throw Error(ErrorKind::TruncatedData, "IDX magic number is incomplete");
  if (p[0] != 0 || p[1] != 0) throw Error(ErrorKind::MalformedHeader, "IDX magic must start with two zero bytes");
  const auto type = static_cast<IdxType>(p[2]);
  if (idx_width(type) == 0) {
    throw Error(ErrorKind::MalformedHeader, "unknown IDX data type 0x" + std::to_string(p[2]));
  }
  const std::size_t ndim = p[3];
  if (ndim == 0) throw Error(ErrorKind::MalformedHeader, "IDX array has no dimensions");
  if (bytes.size() < 4 + 4 * ndim) throw Error(ErrorKind::TruncatedData, "IDX dimension list is incomplete");

  IdxArray out;
  out.type = type;
  for (std::size_t i = 0; i < ndim; ++i) out.dims.push_back(read_be(p + 4 + 4 * i, 4));
  const std::size_t count = element_count(out.dims);
  const std::size_t width = idx_width(type);
  const std::size_t offset = 4 + 4 * ndim;
  const std::size_t expected = offset + count * width;
  if (bytes.size() < expected) {
    throw Error(ErrorKind::TruncatedData, "IDX payload holds " + std::to_string(bytes.size() - offset) +
                                              " bytes, header declares " + std::to_string(count * width));
  }
  if (bytes.size() > expected) throw Error(ErrorKind::MalformedHeader, "trailing bytes after IDX payload");
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) out.values[i] = decode_value(type, p + offset + i * width);
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) { return parse_idx(read_file(path)); }

std::string encode_idx_u8(const Shape& dims, std::span<const std::uint8_t> data) {
  if (element_count(dims) != data.size() || dims.empty() || dims.size() > 255) {
    throw Error(ErrorKind::ShapeMismatch, "IDX dims do not match data");
  }
  std::string out{'\0', '\0', static_cast<char>(IdxType::U8), static_cast<char>(dims.size())};
  for (auto d : dims) {
    for (int shift = 24; shift >= 0; shift -= 8) out += static_cast<char>((d >> shift) & 0xFF);
  }
  out.append(reinterpret_cast<const char*>(data.data()), data.size());
  return out;
}

DatasetHandle load_idx_dataset(const std::filesystem::path& train_images,
                               const std::filesystem::path& train_labels,
                               const std::filesystem::path& test_images,
                               const std::filesystem::path& test_labels) {
  DatasetHandle h;
  h.train = images_to_dataset(read_idx(train_images), read_idx(train_labels), "train");
  h.test = images_to_dataset(read_idx(test_images), read_idx(test_labels), "test");
  if (h.train.sample_shape() != h.test.sample_shape()) {
    throw Error(ErrorKind::ShapeMismatch, "train and test images differ in shape");
  }
  int max_label = 0;
  for (int l : h.train.labels) max_label = std::max(max_label, l);
  for (int l : h.test.labels) max_label = std::max(max_label, l);
  h.train.classes = h.test.classes = static_cast<std::size_t>(max_label) + 1;

  double sum = 0.0;
  for (double v : h.train.inputs.values()) sum += v;
  const double mean = sum / static_cast<double>(h.train.inputs.size());
  double sq = 0.0;
  for (double v : h.train.inputs.values()) sq += (v - mean) * (v - mean);
  double sd = std::sqrt(sq / static_cast<double>(h.train.inputs.size()));
  if (!(sd > 0.0)) sd = 1.0;
  h.mean = {mean};
  h.stddev = {sd};
  standardize(h.train, h.mean, h.stddev);
  standardize(h.test, h.mean, h.stddev);
  return h;
}

DatasetHandle generate_blobs(const BlobOptions& opts, std::uint64_t seed) {
  if (opts.classes < 2 || opts.classes > opts.dim) {
    throw Error(ErrorKind::InvalidParams, "blobs need 2 <= classes <= dim");
  }
  if (opts.per_class < 2 || !(opts.test_fraction > 0.0 && opts.test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidParams, "blobs need per_class >= 2 and test_fraction in (0, 1)");
  }
  const std::size_t n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(opts.per_class * opts.test_fraction)), 1, opts.per_class - 1);
  const double offset = opts.separation / std::sqrt(2.0);

  auto rng = make_rng(seed, "blobs");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (std::size_t k = 0; k < opts.classes; ++k) {
    for (std::size_t i = 0; i < opts.per_class; ++i) {
      std::vector<double> x(opts.dim);
      for (auto& v : x) v = noise(rng);
      x[k] += offset;
      auto& dst_x = i < n_test ? test_x : train_x;
      auto& dst_y = i < n_test ? test_y : train_y;
      dst_x.push_back(std::move(x));
      dst_y.push_back(static_cast<int>(k));
    }
  }

  auto pack = [&](std::vector<std::vector<double>>& xs, std::vector<int>& ys) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Dataset d;
    d.classes = opts.classes;
    std::vector<double> flat;
    for (auto i : order) {
      flat.insert(flat.end(), xs[i].begin(), xs[i].end());
      d.labels.push_back(ys[i]);
    }
    d.inputs = Tensor({order.size(), opts.dim}, std::move(flat));
    return d;
  };
  DatasetHandle h;
  h.train = pack(train_x, train_y);
  h.test = pack(test_x, test_y);

  // Per-feature standardisation fitted on the training split.
  const std::size_t n = h.train.size();
  h.mean.assign(opts.dim, 0.0);
  h.stddev.assign(opts.dim, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < opts.dim; ++j) h.mean[j] += h.train.inputs.row(r)[j] / n;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < opts.dim; ++j) {
      const double d = h.train.inputs.row(r)[j] - h.mean[j];
      h.stddev[j] += d * d / n;
    }
  for (auto& s : h.stddev) s = s > 0.0 ? std::sqrt(s) : 1.0;
  standardize(h.train, h.mean, h.stddev);
  standardize(h.test, h.mean, h.stddev);
  return h;
}

double nearest_centroid_accuracy(const Dataset& reference, const Dataset& data) {
  const std::size_t per = reference.inputs.row_size();
  std::vector<std::vector<double>> centroid(reference.classes, std::vector<double>(per, 0.0));
  std::vector<std::size_t> count(reference.classes, 0);
  for (std::size_t n = 0; n < reference.size(); ++n) {
    const auto row = reference.inputs.row(n);
    auto& c = centroid[reference.labels[n]];
    for (std::size_t j = 0; j < per; ++j) c[j] += row[j];
    ++count[reference.labels[n]];
  }
  for (std::size_t k = 0; k < reference.classes; ++k)
    for (auto& v : centroid[k]) v /= std::max<std::size_t>(1, count[k]);

  std::size_t correct = 0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto row = data.inputs.row(n);
    double best = std::numeric_limits<double>::infinity();
    int best_k = -1;
    for (std::size_t k = 0; k < reference.classes; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < per; ++j) d += (row[j] - centroid[k][j]) * (row[j] - centroid[k][j]);
      if (d < best) {
        best = d;
        best_k = static_cast<int>(k);
      }
    }
    if (best_k == data.labels[n]) ++correct;
  }
  return data.size() ? static_cast<double>(correct) / data.size() : 0.0;
}

}  // namespace qifsnn
