#pragma once

// Independent reference computations for the test suites. Everything here is
// deliberately written against different code paths than the library: plain
// scalar loops, finite differences, and Eigen's JacobiSVD.

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <vector>

#include "vrrae/matrix.hpp"

namespace oracle {

using vrrae::Index;
using vrrae::Matrix;

/// Central finite differences of a scalar function of one matrix.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, Matrix x,
                          double step = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    double saved = x.data()[i];
    x.data()[i] = saved + step;
    double fp = f(x);
    x.data()[i] = saved - step;
    double fm = f(x);
    x.data()[i] = saved;
    g.data()[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// ||a - b||_F / max(||b||_F, floor).
inline double rel_diff(const Matrix& a, const Matrix& b, double floor = 1e-12) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    double d = a.data()[i] - b.data()[i];
    num += d * d;
    den += b.data()[i] * b.data()[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

struct SvdResult {
  std::vector<double> singular_values;  // descending
  Eigen::MatrixXd u, v;
};

/// Full SVD through Eigen, independent of the library's Jacobi code.
inline SvdResult eigen_svd(const Matrix& m) {
  Eigen::Map<const Eigen::MatrixXd> map(m.data(), static_cast<Eigen::Index>(m.rows()),
                                        static_cast<Eigen::Index>(m.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult r;
  r.u = svd.matrixU();
  r.v = svd.matrixV();
  r.singular_values.assign(svd.singularValues().data(),
                           svd.singularValues().data() + svd.singularValues().size());
  return r;
}

/// sqrt(sum of squared singular values beyond rank k).
inline double svd_tail_residual(const Matrix& m, Index k) {
  auto r = eigen_svd(m);
  double s = 0.0;
  for (Index i = k; i < r.singular_values.size(); ++i)
    s += r.singular_values[i] * r.singular_values[i];
  return std::sqrt(s);
}

/// Scalar-loop reconstruction loss: mean over columns of squared L2.
inline double loop_rec_loss(const Matrix& x, const Matrix& xt) {
  double total = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    double col = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
      double d = x(i, j) - xt(i, j);
      col += d * d;
    }
    total += col;
  }
  return total / static_cast<double>(x.cols());
}

/// Element-wise closed form KL(N(mu,sigma^2) || N(0,1)) summed by loop.
inline double loop_kl(const Matrix& mu, const Matrix& sigma) {
  double total = 0.0;
  for (Index j = 0; j < mu.cols(); ++j)
    for (Index i = 0; i < mu.rows(); ++i) {
      double m = mu(i, j);
      double v = sigma(i, j) * sigma(i, j);
      total += 0.5 * (m * m + v - std::log(v) - 1.0);
    }
  return total / static_cast<double>(mu.cols());
}

}  // namespace oracle
