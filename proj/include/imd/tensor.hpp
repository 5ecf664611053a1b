#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace imd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major buffer of doubles.
///
/// Most of the library treats a tensor as a batch: `rows()` is the leading
/// dimension and `cols()` the product of the remaining ones, so an image batch
/// of shape (n, 3, 32, 32) is an n x 3072 matrix of flattened points.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor. Every dimension must be >= 1.
  explicit Tensor(Shape shape);

  /// Takes ownership of `data`; throws if its length does not match the shape
  /// or if any element is non-finite.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor(Shape{rows, cols}); }
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols(), cols()}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols(), cols()}; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }

  bool all_finite() const;

  /// Same data viewed under a new shape of equal size.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Rows `indices[i]` of `source`, in order.
Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices);

}  // namespace imd
