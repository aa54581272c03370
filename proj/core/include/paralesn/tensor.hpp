#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "paralesn/error.hpp"

namespace paralesn {

using Complex = std::complex<double>;

/// Dense row-major matrix. Row t of a time series matrix is time step t.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data size " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  /// Copy of rows [begin, end).
  Matrix slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) throw ShapeError("row slice out of range");
    return Matrix(end - begin, cols_,
                  std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                 data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;
using ComplexVector = std::vector<Complex>;
using RealVector = std::vector<double>;

/// T x N complex hidden states; row t holds the state after step t+1.
using StateSequence = ComplexMatrix;

/// Concatenate matrices with equal row counts side by side.
RealMatrix hconcat(std::span<const RealMatrix> blocks);

/// Euclidean norm of a complex vector.
double norm2(std::span<const Complex> v);

/// Largest relative elementwise deviation |a-b| / max(|b|, floor).
double max_relative_error(const ComplexMatrix& a, const ComplexMatrix& b, double floor = 1e-12);
double max_relative_error(const RealMatrix& a, const RealMatrix& b, double floor = 1e-12);

bool all_finite(std::span<const Complex> v);
bool all_finite(std::span<const double> v);

}  // namespace paralesn
