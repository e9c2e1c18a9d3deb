#include "qifsnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "qifsnn/error.hpp"

namespace qifsnn {

std::size_t element_count(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream ss;
  ss << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? "," : "") << shape[i];
  ss << ')';
  return ss.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "shape " + shape_string(shape_) + " does not hold " +
                                              std::to_string(data_.size()) + " elements");
  }
}

std::size_t Tensor::row_size() const noexcept {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t i) noexcept {
  const auto n = row_size();
  return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const noexcept {
  const auto n = row_size();
  return std::span<const double>(data_).subspan(i * n, n);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::reshape(Shape shape) {
  if (element_count(shape) != data_.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": expected " +
                                              shape_string(expected) + ", got " +
                                              shape_string(t.shape()));
  }
}

void accumulate(Tensor& out, const Tensor& in) {
  require_shape(in, out.shape(), "accumulate");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
}

Tensor slice_rows(const Tensor& t, std::size_t first, std::size_t count) {
  if (t.rank() == 0 || first + count > t.dim(0)) {
    throw Error(ErrorKind::IndexOutOfRange, "row slice outside " + shape_string(t.shape()));
  }
  Shape shape = t.shape();
  shape[0] = count;
  const auto n = t.row_size();
  std::vector<double> data(t.data() + first * n, t.data() + (first + count) * n);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace qifsnn
