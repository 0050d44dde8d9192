#pragma once

#include <vector>

#include "vrrae/matrix.hpp"
#include "vrrae/model.hpp"
#include "vrrae/rng.hpp"

namespace vrrae {

/// Full-covariance mixture over bottleneck coefficients.
struct GaussianMixture {
  std::vector<double> weights;      // simplex
  std::vector<Matrix> means;        // K column vectors, k* x 1
  std::vector<Matrix> covariances;  // K SPD matrices, k* x k*

  Index components() const { return weights.size(); }
  Index dim() const { return means.empty() ? 0 : means[0].rows(); }
  Matrix mixture_mean() const;
};

/// EM fit with seeded k-means++ style initialization. A ridge of
/// 1e-6 * trace / k* is added to every covariance each M-step; iteration
/// stops when the mean log-likelihood improves by less than tol.
/// `ll_history`, when given, receives the log-likelihood after every
/// iteration (EM guarantees it is non-decreasing).
GaussianMixture gmm_fit(const Matrix& latents, Index k_components, Rng& rng,
                        Index max_iters = 200, double tol = 1e-8,
                        std::vector<double>* ll_history = nullptr);

/// Mean log-likelihood of columns of `latents` under the mixture.
double gmm_log_likelihood(const GaussianMixture& gmm, const Matrix& latents);

/// Component by weight, then a Cholesky-factored Gaussian draw.
Matrix gmm_sample(const GaussianMixture& gmm, Index count, Rng& rng);

/// Strictly interior points of the segment [z_a, z_b]:
/// column t is (1-l)z_a + l z_b with l = (t+1)/(steps+1).
Matrix interpolate(const Matrix& z_a, const Matrix& z_b, Index steps);

/// Decodes bottleneck coefficients; the SVD family lifts through the frozen
/// basis first.
Matrix decode_latents(const TrainedModel& model, const Matrix& latents);

}  // namespace vrrae
