#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qifsnn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Elements per leading index, i.e. product of shape[1:].
  std::size_t row_size() const noexcept;
  std::span<double> row(std::size_t i) noexcept;
  std::span<const double> row(std::size_t i) const noexcept;

  // Same data, new shape; throws ShapeMismatch if the element count differs.
  Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  void fill(double v) noexcept;
  bool all_finite() const noexcept;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void require_shape(const Tensor& t, const Shape& expected, const char* what);

// out += in, elementwise.
void accumulate(Tensor& out, const Tensor& in);

// Rows [first, first + count) of a tensor along its leading axis.
Tensor slice_rows(const Tensor& t, std::size_t first, std::size_t count);

}  // namespace qifsnn
