#include "vrrae/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vrrae {

namespace {

constexpr double kRidgeScale = 1e-6;

// Lower-triangular Cholesky factor; throws on non-SPD input.
Matrix cholesky(const Matrix& a) {
  const Index n = a.rows();
  Matrix l(n, n);
  for (Index j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (Index k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (diag <= 0.0) throw ValueError("cholesky: matrix not positive definite");
    l(j, j) = std::sqrt(diag);
    for (Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

struct ComponentDensity {
  Matrix chol;      // L with covariance = L L'
  double log_norm;  // -0.5 (d log 2pi + log det)
};

ComponentDensity prepare_density(const Matrix& cov) {
  ComponentDensity d;
  d.chol = cholesky(cov);
  double log_det = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) log_det += std::log(d.chol(i, i));
  log_det *= 2.0;
  d.log_norm = -0.5 * (static_cast<double>(cov.rows()) * std::log(2.0 * std::numbers::pi) +
                       log_det);
  return d;
}

double log_density(const ComponentDensity& d, const Matrix& mean,
                   std::span<const double> x) {
  const Index n = mean.rows();
  // solve L y = x - mean by forward substitution
  std::vector<double> y(n);
  for (Index i = 0; i < n; ++i) {
    double s = x[i] - mean(i, 0);
    for (Index k = 0; k < i; ++k) s -= d.chol(i, k) * y[k];
    y[i] = s / d.chol(i, i);
  }
  double quad = 0.0;
  for (double v : y) quad += v * v;
  return d.log_norm - 0.5 * quad;
}

void add_ridge(Matrix& cov) {
  double trace = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) trace += cov(i, i);
  double ridge = kRidgeScale * trace / static_cast<double>(cov.rows());
  if (ridge <= 0.0) ridge = kRidgeScale;  // degenerate all-zero scatter
  for (Index i = 0; i < cov.rows(); ++i) cov(i, i) += ridge;
}

}  // namespace

Matrix GaussianMixture::mixture_mean() const {
  Matrix m(dim(), 1);
  for (Index k = 0; k < components(); ++k)
    for (Index i = 0; i < dim(); ++i) m(i, 0) += weights[k] * means[k](i, 0);
  return m;
}

double gmm_log_likelihood(const GaussianMixture& gmm, const Matrix& latents) {
  std::vector<ComponentDensity> dens;
  dens.reserve(gmm.components());
  for (const auto& cov : gmm.covariances) dens.push_back(prepare_density(cov));
  double total = 0.0;
  for (Index j = 0; j < latents.cols(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(gmm.components());
    for (Index k = 0; k < gmm.components(); ++k) {
      logs[k] = std::log(gmm.weights[k]) + log_density(dens[k], gmm.means[k], latents.col(j));
      best = std::max(best, logs[k]);
    }
    double s = 0.0;
    for (double lv : logs) s += std::exp(lv - best);
    total += best + std::log(s);
  }
  return total / static_cast<double>(latents.cols());
}

GaussianMixture gmm_fit(const Matrix& latents, Index k_components, Rng& rng,
                        Index max_iters, double tol, std::vector<double>* ll_history) {
  const Index n = latents.cols();
  const Index d = latents.rows();
  if (k_components < 1) throw ValueError("gmm_fit: need at least one component");
  if (n < k_components)
    throw ValueError("gmm_fit: " + std::to_string(n) + " samples for " +
                     std::to_string(k_components) + " components");

  // k-means++ style seeding on squared distances
  std::vector<Index> centers;
  centers.push_back(rng.uniform_index(n));
  std::vector<double> dist2(n, 0.0);
  while (centers.size() < k_components) {
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (Index c : centers) {
        double s = 0.0;
        for (Index i = 0; i < d; ++i) {
          double diff = latents(i, j) - latents(i, c);
          s += diff * diff;
        }
        best = std::min(best, s);
      }
      dist2[j] = best;
      total += best;
    }
    Index pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      for (Index j = 0; j < n; ++j) {
        acc += dist2[j];
        if (r <= acc) {
          pick = j;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(n);
    }
    centers.push_back(pick);
  }

  GaussianMixture gmm;
  gmm.weights.assign(k_components, 1.0 / static_cast<double>(k_components));
  gmm.means.reserve(k_components);
  for (Index c : centers) {
    Matrix m(d, 1);
    for (Index i = 0; i < d; ++i) m(i, 0) = latents(i, c);
    gmm.means.push_back(std::move(m));
  }
  // shared initial covariance: global scatter around the sample mean
  Matrix global_mean(d, 1);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < d; ++i) global_mean(i, 0) += latents(i, j);
  for (Index i = 0; i < d; ++i) global_mean(i, 0) /= static_cast<double>(n);
  Matrix scatter(d, d);
  for (Index j = 0; j < n; ++j)
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b)
        scatter(a, b) += (latents(a, j) - global_mean(a, 0)) *
                         (latents(b, j) - global_mean(b, 0));
  for (Index i = 0; i < scatter.size(); ++i)
    scatter.data()[i] /= static_cast<double>(n);
  add_ridge(scatter);
  gmm.covariances.assign(k_components, scatter);

  Matrix resp(k_components, n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (Index iter = 0; iter < max_iters; ++iter) {
    // E-step
    std::vector<ComponentDensity> dens;
    dens.reserve(k_components);
    for (const auto& cov : gmm.covariances) dens.push_back(prepare_density(cov));
    double ll = 0.0;
    for (Index j = 0; j < n; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < k_components; ++k) {
        resp(k, j) =
            std::log(gmm.weights[k]) + log_density(dens[k], gmm.means[k], latents.col(j));
        best = std::max(best, resp(k, j));
      }
      double s = 0.0;
      for (Index k = 0; k < k_components; ++k) s += std::exp(resp(k, j) - best);
      double log_px = best + std::log(s);
      ll += log_px;
      for (Index k = 0; k < k_components; ++k)
        resp(k, j) = std::exp(resp(k, j) - log_px);
    }
    ll /= static_cast<double>(n);
    if (ll_history) ll_history->push_back(ll);

    // M-step
    for (Index k = 0; k < k_components; ++k) {
      double nk = 0.0;
      for (Index j = 0; j < n; ++j) nk += resp(k, j);
      nk = std::max(nk, 1e-300);
      gmm.weights[k] = nk / static_cast<double>(n);
      Matrix mean(d, 1);
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < d; ++i) mean(i, 0) += resp(k, j) * latents(i, j);
      for (Index i = 0; i < d; ++i) mean(i, 0) /= nk;
      Matrix cov(d, d);
      for (Index j = 0; j < n; ++j) {
        double r = resp(k, j);
        for (Index a = 0; a < d; ++a)
          for (Index b = 0; b < d; ++b)
            cov(a, b) += r * (latents(a, j) - mean(a, 0)) * (latents(b, j) - mean(b, 0));
      }
      for (Index i = 0; i < cov.size(); ++i) cov.data()[i] /= nk;
      add_ridge(cov);
      gmm.means[k] = std::move(mean);
      gmm.covariances[k] = std::move(cov);
    }

    if (ll - prev_ll < tol && iter > 0) break;
    prev_ll = ll;
  }
  return gmm;
}

Matrix gmm_sample(const GaussianMixture& gmm, Index count, Rng& rng) {
  const Index d = gmm.dim();
  std::vector<Matrix> chols;
  chols.reserve(gmm.components());
  for (const auto& cov : gmm.covariances) chols.push_back(cholesky(cov));

  Matrix out(d, count);
  for (Index j = 0; j < count; ++j) {
    double r = rng.uniform();
    Index k = 0;
    double acc = 0.0;
    for (Index c = 0; c < gmm.components(); ++c) {
      acc += gmm.weights[c];
      if (r <= acc || c + 1 == gmm.components()) {
        k = c;
        break;
      }
    }
    std::vector<double> z(d);
    for (auto& v : z) v = rng.normal();
    for (Index i = 0; i < d; ++i) {
      double s = gmm.means[k](i, 0);
      for (Index c = 0; c <= i; ++c) s += chols[k](i, c) * z[c];
      out(i, j) = s;
    }
  }
  return out;
}

Matrix interpolate(const Matrix& z_a, const Matrix& z_b, Index steps) {
  if (steps < 1) throw ValueError("interpolate: steps must be >= 1");
  if (!z_a.same_shape(z_b) || z_a.cols() != 1)
    throw ShapeError("interpolate: expected equal column vectors, got " + z_a.shape_str() +
                     " and " + z_b.shape_str());
  Matrix out(z_a.rows(), steps);
  for (Index t = 0; t < steps; ++t) {
    double lambda = static_cast<double>(t + 1) / static_cast<double>(steps + 1);
    for (Index i = 0; i < z_a.rows(); ++i)
      out(i, t) = (1.0 - lambda) * z_a(i, 0) + lambda * z_b(i, 0);
  }
  return out;
}

Matrix decode_latents(const TrainedModel& model, const Matrix& latents) {
  if (latents.rows() != model.spec.bottleneck)
    throw ShapeError("decode_latents: latents " + latents.shape_str() +
                     " do not match bottleneck k*=" + std::to_string(model.spec.bottleneck));
  if (is_svd_family(model.spec.variant)) {
    if (!model.inference_basis)
      throw ValueError("decode_latents: model has no inference basis");
    return decode_eval(model, matmul(*model.inference_basis, latents));
  }
  return decode_eval(model, latents);
}

}  // namespace vrrae
