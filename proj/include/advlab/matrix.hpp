#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace advlab {

/// Row-major dense matrix of doubles. The only numeric container in the
/// library: inputs, logits, weights and gradients all live in one.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `data`; throws DimensionError if the length is not
  /// rows*cols and NumericError if any element is non-finite.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// Copies rows [begin, end) into a new matrix.
  DenseMatrix slice_rows(std::size_t begin, std::size_t end) const;
  void set_rows(std::size_t begin, const DenseMatrix& block);

  bool same_shape(const DenseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const DenseMatrix& other) const = default;

  /// Throws NumericError naming `context` if any element is NaN or Inf.
  void require_finite(std::string_view context) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, std::string_view context);

/// out = a * b^T (b given row-major as [n x k]); the layout matches weights
/// stored as [out x in].
DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b);

/// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace advlab
