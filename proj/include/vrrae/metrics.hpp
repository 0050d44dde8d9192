#pragma once

#include <span>
#include <vector>

#include "vrrae/dataset.hpp"
#include "vrrae/matrix.hpp"

namespace vrrae {

struct RelativeErrorStats {
  std::vector<double> per_sample;  // percent
  double mean = 0.0;
  double stddev = 0.0;
};

/// Per-column 100 * ||true_j - pred_j|| / ||true_j||, plus mean and std.
RelativeErrorStats relative_error(const Matrix& x_true, const Matrix& x_pred);

/// Fits a bump of the dataset's fixed magnitude and spread to the image
/// (center-only fit: coarse search over pixel centers, then parabolic
/// refinement) and returns the relative error of the image against the fit.
/// All-zero images return 100 by convention.
double random_gen_error(std::span<const double> image, const BumpParams& params);

/// Per-dimension posterior statistics over a full dataset of latent means.
struct CollapseReport {
  std::vector<double> mean_of_means;  // zeta_hat per dimension
  std::vector<double> std_of_means;
  std::vector<double> bound;      // s_bar_i / sqrt(N)
  std::vector<double> bound_gap;  // |zeta_hat_i| - bound_i
  std::vector<bool> collapsed;
  double threshold = 0.0;

  Index flagged_count() const;
};

/// Flags dimension i as collapsed when std_j(means[i,j]) falls below
/// threshold * max_i std. s_bar feeds the collapse-value bound; for models
/// without an SVD pass the row norms of `means` are the natural argument.
CollapseReport collapse_diagnostic(const Matrix& means, const std::vector<double>& s_bar,
                                   double threshold);

struct RowNormSpectrum {
  std::vector<double> norms;  // s~_i = ||row i||
  bool sorted = false;        // non-increasing?
};

RowNormSpectrum row_norm_spectrum(const Matrix& alpha);

}  // namespace vrrae
