#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vrrae/error.hpp"

namespace vrrae {

using Index = std::size_t;

/// Dense real matrix with 64-bit entries, column-major storage.
/// Columns are samples everywhere in this project.
class Matrix {
 public:
  Matrix() = default;
  Matrix(Index rows, Index cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix zeros(Index rows, Index cols) { return Matrix(rows, cols); }
  static Matrix constant(Index rows, Index cols, double v);
  static Matrix ones(Index rows, Index cols) { return constant(rows, cols, 1.0); }
  static Matrix identity(Index n);
  static Matrix column(std::span<const double> values);

  /// Builds a matrix from external column-major data, rejecting NaN/Inf.
  static Matrix from_data(Index rows, Index cols, std::span<const double> values);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(Index i, Index j) { return data_[j * rows_ + i]; }
  double operator()(Index i, Index j) const { return data_[j * rows_ + i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> col(Index j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(Index j) const { return {data_.data() + j * rows_, rows_}; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
};

// Kernels shared by the tape and the plain evaluation paths. Shape mismatches
// throw ShapeError naming the operation and both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a' * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b'
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);
void add_in_place(Matrix& dst, const Matrix& src);

double sum_all(const Matrix& a);
Matrix sum_rows(const Matrix& a);  // column vector of per-row sums
Matrix broadcast_column(const Matrix& col, Index cols);
Matrix slice_rows(const Matrix& a, Index begin, Index end);  // rows [begin, end)
Matrix concat_rows(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double column_norm(const Matrix& a, Index j);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace vrrae
