#include "vrrae/matrix.hpp"

#include <Eigen/Core>
#include <cmath>

namespace vrrae {

namespace {

using EigenMap = Eigen::Map<Eigen::MatrixXd>;
using ConstEigenMap = Eigen::Map<const Eigen::MatrixXd>;

ConstEigenMap map_of(const Matrix& m) {
  return ConstEigenMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                       static_cast<Eigen::Index>(m.cols()));
}

EigenMap map_of(Matrix& m) {
  return EigenMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

[[noreturn]] void shape_fail(const std::string& op, const Matrix& a, const Matrix& b) {
  throw ShapeError(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_fail(op, a, b);
}

}  // namespace

Matrix Matrix::constant(Index rows, Index cols, double v) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = v;
  return m;
}

Matrix Matrix::identity(Index n) {
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  Matrix m(values.size(), 1);
  for (Index i = 0; i < values.size(); ++i) m(i, 0) = values[i];
  return m;
}

Matrix Matrix::from_data(Index rows, Index cols, std::span<const double> values) {
  if (values.size() != rows * cols)
    throw ShapeError("from_data: " + std::to_string(values.size()) + " values for a " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  Matrix m(rows, cols);
  for (Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw ValueError("from_data: non-finite entry at flat index " + std::to_string(i));
    m.data()[i] = values[i];
  }
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  map_of(c).noalias() = map_of(a) * map_of(b);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_fail("matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  map_of(c).noalias() = map_of(a).transpose() * map_of(b);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  map_of(c).noalias() = map_of(a) * map_of(b).transpose();
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape("add", a, b);
  Matrix c(a.rows(), a.cols());
  for (Index i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape("subtract", a, b);
  Matrix c(a.rows(), a.cols());
  for (Index i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard", a, b);
  Matrix c(a.rows(), a.cols());
  for (Index i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] * b.data()[i];
  return c;
}

Matrix scale(const Matrix& a, double c) {
  Matrix r(a.rows(), a.cols());
  for (Index i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] * c;
  return r;
}

void add_in_place(Matrix& dst, const Matrix& src) {
  require_same_shape("add_in_place", dst, src);
  for (Index i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

double sum_all(const Matrix& a) {
  // Fixed column-major order; reproducibility depends on it.
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += a.data()[i];
  return s;
}

Matrix sum_rows(const Matrix& a) {
  Matrix s(a.rows(), 1);
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) s(i, 0) += a(i, j);
  return s;
}

Matrix broadcast_column(const Matrix& col, Index cols) {
  if (col.cols() != 1)
    throw ShapeError("broadcast_column: expected a column vector, got " + col.shape_str());
  Matrix r(col.rows(), cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < col.rows(); ++i) r(i, j) = col(i, 0);
  return r;
}

Matrix slice_rows(const Matrix& a, Index begin, Index end) {
  if (begin > end || end > a.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + std::to_string(a.rows()) + " rows");
  Matrix r(end - begin, a.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = begin; i < end; ++i) r(i - begin, j) = a(i, j);
  return r;
}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_fail("concat_rows", a, b);
  Matrix r(a.rows() + b.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) r(i, j) = a(i, j);
    for (Index i = 0; i < b.rows(); ++i) r(a.rows() + i, j) = b(i, j);
  }
  return r;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

double column_norm(const Matrix& a, Index j) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace vrrae
