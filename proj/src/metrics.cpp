#include "vrrae/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace vrrae {

RelativeErrorStats relative_error(const Matrix& x_true, const Matrix& x_pred) {
  if (!x_true.same_shape(x_pred))
    throw ShapeError("relative_error: shapes " + x_true.shape_str() + " and " +
                     x_pred.shape_str() + " differ");
  RelativeErrorStats stats;
  stats.per_sample.resize(x_true.cols());
  for (Index j = 0; j < x_true.cols(); ++j) {
    double denom = column_norm(x_true, j);
    if (denom == 0.0)
      throw ValueError("relative_error: zero-norm reference sample at column " +
                       std::to_string(j));
    double num = 0.0;
    for (Index i = 0; i < x_true.rows(); ++i) {
      double d = x_true(i, j) - x_pred(i, j);
      num += d * d;
    }
    stats.per_sample[j] = 100.0 * std::sqrt(num) / denom;
  }
  double mean = 0.0;
  for (double v : stats.per_sample) mean += v;
  mean /= static_cast<double>(stats.per_sample.size());
  double var = 0.0;
  for (double v : stats.per_sample) var += (v - mean) * (v - mean);
  var /= static_cast<double>(stats.per_sample.size());
  stats.mean = mean;
  stats.stddev = std::sqrt(var);
  return stats;
}

namespace {

// ||G(c) - img||^2 for the fixed-magnitude, fixed-spread bump at center c.
double bump_residual_sq(std::span<const double> image, const BumpParams& p, double cx,
                        double cy) {
  const Index n = p.image_size;
  const double inv = 1.0 / (2.0 * p.sigma * p.sigma);
  double s = 0.0;
  for (Index r = 0; r < n; ++r) {
    double y = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
    double dy2 = (y - cy) * (y - cy);
    for (Index c = 0; c < n; ++c) {
      double x = (static_cast<double>(c) + 0.5) / static_cast<double>(n);
      double g = p.magnitude * std::exp(-((x - cx) * (x - cx) + dy2) * inv);
      double d = g - image[r * n + c];
      s += d * d;
    }
  }
  return s;
}

// Parabolic minimum of the residual through (c-h, c, c+h); falls back to the
// best sample when the fit degenerates.
double parabolic_step(std::span<const double> image, const BumpParams& p, double cx,
                      double cy, double h, bool along_x) {
  double c0 = along_x ? cx : cy;
  double fm = bump_residual_sq(image, p, along_x ? c0 - h : cx, along_x ? cy : c0 - h);
  double f0 = bump_residual_sq(image, p, cx, cy);
  double fp = bump_residual_sq(image, p, along_x ? c0 + h : cx, along_x ? cy : c0 + h);
  double denom = fm - 2.0 * f0 + fp;
  if (denom <= 0.0) {
    if (fm < f0 && fm <= fp) return c0 - h;
    if (fp < f0) return c0 + h;
    return c0;
  }
  double step = 0.5 * (fm - fp) / denom;
  return c0 + std::clamp(step, -1.0, 1.0) * h;
}

}  // namespace

double random_gen_error(std::span<const double> image, const BumpParams& p) {
  const Index n = p.image_size;
  if (image.size() != n * n) throw ShapeError("random_gen_error: bad image size");

  bool all_zero = true;
  for (double v : image)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) return 100.0;  // no fit possible

  // Coarse scan over pixel centers. The bump is separable,
  // G(r,c) = e_cy(r) * e_cx(c) / M with e_c(i) = M exp(-(x_i - x_c)^2 / 2s^2),
  // so every candidate reduces to axis profiles and one pass over the image.
  std::vector<double> axis(n), e(n * n), enorm2(n);
  for (Index i = 0; i < n; ++i) axis[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  const double inv = 1.0 / (2.0 * p.sigma * p.sigma);
  for (Index c = 0; c < n; ++c) {  // candidate center index
    double norm2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      double v = p.magnitude * std::exp(-(axis[i] - axis[c]) * (axis[i] - axis[c]) * inv);
      e[c * n + i] = v;
      norm2 += v * v;
    }
    enorm2[c] = norm2;
  }

  double img_norm2 = 0.0;
  for (double v : image) img_norm2 += v * v;

  // inner[cx][r] = sum_c e_cx(c) * img(r, c)
  std::vector<double> inner(n * n, 0.0);
  for (Index cx = 0; cx < n; ++cx)
    for (Index r = 0; r < n; ++r) {
      double s = 0.0;
      for (Index c = 0; c < n; ++c) s += e[cx * n + c] * image[r * n + c];
      inner[cx * n + r] = s;
    }

  const double m = p.magnitude;
  double best = -1.0;
  double best_cx = axis[0], best_cy = axis[0];
  for (Index cy = 0; cy < n; ++cy) {
    for (Index cx = 0; cx < n; ++cx) {
      double dotv = 0.0;  // m * <img, G>
      for (Index r = 0; r < n; ++r) dotv += e[cy * n + r] * inner[cx * n + r];
      double res = img_norm2 - 2.0 * dotv / m + enorm2[cx] * enorm2[cy] / (m * m);
      if (best < 0.0 || res < best) {
        best = res;
        best_cx = axis[cx];
        best_cy = axis[cy];
      }
    }
  }

  // local refinement, halving the probe step from one pixel pitch
  double h = 1.0 / static_cast<double>(n);
  for (int it = 0; it < 4; ++it) {
    best_cx = parabolic_step(image, p, best_cx, best_cy, h, true);
    best_cy = parabolic_step(image, p, best_cx, best_cy, h, false);
    h *= 0.5;
  }

  std::vector<double> fitted(n * n);
  render_bump(p, best_cx, best_cy, fitted);
  double num = 0.0, denom = 0.0;
  for (Index i = 0; i < fitted.size(); ++i) {
    double d = fitted[i] - image[i];
    num += d * d;
    denom += fitted[i] * fitted[i];
  }
  if (denom == 0.0) return 100.0;
  return 100.0 * std::sqrt(num / denom);
}

Index CollapseReport::flagged_count() const {
  Index n = 0;
  for (bool f : collapsed)
    if (f) ++n;
  return n;
}

CollapseReport collapse_diagnostic(const Matrix& means, const std::vector<double>& s_bar,
                                   double threshold) {
  const Index k = means.rows();
  const Index n = means.cols();
  if (n < 2) throw ValueError("collapse_diagnostic: need at least 2 samples");
  if (s_bar.size() != k)
    throw ShapeError("collapse_diagnostic: s_bar size " + std::to_string(s_bar.size()) +
                     " does not match " + std::to_string(k) + " dimensions");

  CollapseReport report;
  report.threshold = threshold;
  report.mean_of_means.resize(k);
  report.std_of_means.resize(k);
  report.bound.resize(k);
  report.bound_gap.resize(k);
  report.collapsed.assign(k, false);

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < k; ++i) {
    double m = 0.0;
    for (Index j = 0; j < n; ++j) m += means(i, j);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (Index j = 0; j < n; ++j) var += (means(i, j) - m) * (means(i, j) - m);
    var /= static_cast<double>(n);
    report.mean_of_means[i] = m;
    report.std_of_means[i] = std::sqrt(var);
    report.bound[i] = s_bar[i] / sqrt_n;
    report.bound_gap[i] = std::abs(m) - report.bound[i];
  }
  double max_std = *std::max_element(report.std_of_means.begin(), report.std_of_means.end());
  for (Index i = 0; i < k; ++i)
    report.collapsed[i] = report.std_of_means[i] < threshold * max_std;
  return report;
}

RowNormSpectrum row_norm_spectrum(const Matrix& alpha) {
  if (alpha.cols() < 1) throw ValueError("row_norm_spectrum: empty matrix");
  RowNormSpectrum spec;
  spec.norms.resize(alpha.rows());
  for (Index i = 0; i < alpha.rows(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < alpha.cols(); ++j) s += alpha(i, j) * alpha(i, j);
    spec.norms[i] = std::sqrt(s);
  }
  spec.sorted = true;
  for (Index i = 0; i + 1 < spec.norms.size(); ++i)
    if (spec.norms[i] < spec.norms[i + 1]) {
      spec.sorted = false;
      break;
    }
  return spec;
}

}  // namespace vrrae
