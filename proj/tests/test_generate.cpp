#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "vrrae/generate.hpp"
#include "vrrae/rng.hpp"
#include "vrrae/svd.hpp"

using namespace vrrae;

namespace {

Matrix two_clusters(Rng& rng) {
  Matrix pts(1, 400);
  for (Index j = 0; j < 200; ++j) pts(0, j) = -5.0 + 0.1 * rng.normal();
  for (Index j = 200; j < 400; ++j) pts(0, j) = 5.0 + 0.1 * rng.normal();
  return pts;
}

}  // namespace

TEST_CASE("K=1 fit is the exact sample mean and covariance plus the ridge") {
  Rng rng(31);
  Matrix pts = rng.normal_matrix(3, 50);
  Rng fit_rng(1);
  GaussianMixture gmm = gmm_fit(pts, 1, fit_rng);

  Matrix mean(3, 1);
  for (Index j = 0; j < 50; ++j)
    for (Index i = 0; i < 3; ++i) mean(i, 0) += pts(i, j);
  for (Index i = 0; i < 3; ++i) mean(i, 0) /= 50.0;
  Matrix cov(3, 3);
  for (Index j = 0; j < 50; ++j)
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b)
        cov(a, b) += (pts(a, j) - mean(a, 0)) * (pts(b, j) - mean(b, 0)) / 50.0;
  double trace = cov(0, 0) + cov(1, 1) + cov(2, 2);
  for (Index i = 0; i < 3; ++i) cov(i, i) += 1e-6 * trace / 3.0;

  CHECK(gmm.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracle::rel_diff(gmm.means[0], mean) < 1e-10);
  CHECK(oracle::rel_diff(gmm.covariances[0], cov) < 1e-10);
}

TEST_CASE("two well-separated clusters are recovered within 0.05") {
  Rng rng(32);
  Matrix pts = two_clusters(rng);
  Rng fit_rng(2);
  GaussianMixture gmm = gmm_fit(pts, 2, fit_rng);
  double lo = std::min(gmm.means[0](0, 0), gmm.means[1](0, 0));
  double hi = std::max(gmm.means[0](0, 0), gmm.means[1](0, 0));
  CHECK(std::abs(lo + 5.0) < 0.05);
  CHECK(std::abs(hi - 5.0) < 0.05);
  CHECK(gmm.weights[0] == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("EM log-likelihood is non-decreasing") {
  Rng rng(33);
  Matrix pts = rng.normal_matrix(2, 120);
  for (Index j = 0; j < 120; ++j) pts(0, j) += (j % 3) * 2.0;  // mild structure
  Rng fit_rng(3);
  std::vector<double> history;
  gmm_fit(pts, 3, fit_rng, 100, 1e-12, &history);
  REQUIRE(history.size() >= 2);
  for (Index i = 0; i + 1 < history.size(); ++i)
    CHECK(history[i + 1] >= history[i] - 1e-9);
}

TEST_CASE("gmm_fit input validation") {
  Rng rng(34);
  Matrix pts = rng.normal_matrix(2, 3);
  Rng fit_rng(4);
  CHECK_THROWS_AS(gmm_fit(pts, 4, fit_rng), ValueError);
  CHECK_THROWS_AS(gmm_fit(pts, 0, fit_rng), ValueError);
}

TEST_CASE("sampling: ridge-only covariance concentrates at the mean") {
  Matrix pts = Matrix::constant(2, 30, 1.5);  // zero scatter, ridge only
  Rng fit_rng(5);
  GaussianMixture gmm = gmm_fit(pts, 1, fit_rng);
  Rng sample_rng(6);
  Matrix draws = gmm_sample(gmm, 200, sample_rng);
  for (Index i = 0; i < draws.size(); ++i)
    CHECK(std::abs(draws.data()[i] - 1.5) < 1e-2);
}

TEST_CASE("sampling: counts and determinism") {
  Rng rng(35);
  Matrix pts = two_clusters(rng);
  Rng fit_rng(7);
  GaussianMixture gmm = gmm_fit(pts, 2, fit_rng);
  Rng s1(8), s2(8);
  Matrix a = gmm_sample(gmm, 1250, s1);
  Matrix b = gmm_sample(gmm, 1250, s2);
  CHECK(a.cols() == 1250);
  CHECK(a == b);
}

TEST_CASE("sampled mean approaches the mixture mean") {
  Rng rng(36);
  Matrix pts = two_clusters(rng);
  Rng fit_rng(9);
  GaussianMixture gmm = gmm_fit(pts, 2, fit_rng);
  Rng sample_rng(10);
  const Index n = 100000;
  Matrix draws = gmm_sample(gmm, n, sample_rng);
  double mean = sum_all(draws) / double(n);
  // mixture std is ~5 (two modes at +-5); 3 sigma Monte-Carlo bound
  double bound = 3.0 * 5.1 / std::sqrt(double(n));
  CHECK(std::abs(mean - gmm.mixture_mean()(0, 0)) < bound);
}

TEST_CASE("interpolate: interior points of the segment") {
  Matrix a = Matrix::constant(3, 1, 1.0);
  Matrix b = Matrix::constant(3, 1, 3.0);

  Matrix mid = interpolate(a, b, 1);
  CHECK(mid.cols() == 1);
  CHECK(mid(0, 0) == doctest::Approx(2.0));

  Matrix same = interpolate(a, a, 4);
  for (Index i = 0; i < same.size(); ++i) CHECK(same.data()[i] == doctest::Approx(1.0));

  Matrix five = interpolate(a, b, 5);
  for (Index t = 0; t < 5; ++t) {
    double lambda = double(t + 1) / 6.0;
    CHECK(five(0, t) == doctest::Approx(1.0 + 2.0 * lambda));
  }
  CHECK_THROWS_AS(interpolate(a, b, 0), ValueError);
  CHECK_THROWS_AS(interpolate(a, Matrix::ones(2, 1), 3), ShapeError);
}

TEST_CASE("interpolate is affine in its endpoints") {
  Rng rng(37);
  Matrix a = rng.normal_matrix(4, 1);
  Matrix b = rng.normal_matrix(4, 1);
  Matrix scaled = interpolate(scale(a, 2.5), scale(b, 2.5), 3);
  Matrix direct = scale(interpolate(a, b, 3), 2.5);
  CHECK(oracle::rel_diff(scaled, direct) < 1e-14);
}

TEST_CASE("decode_latents is consistent with the inference path") {
  ModelSpec spec;
  spec.variant = Variant::Vrrae;
  spec.input_dim = 12;
  spec.latent_dim = 6;
  spec.bottleneck = 2;
  spec.encoder_hidden = {8};
  spec.decoder_hidden = {8, 8};
  TrainedModel model = init_model(spec, 41);
  Rng rng(38);
  Matrix x = rng.uniform_matrix(12, 10, 0.0, 1.0);
  finalize_basis(model, x);

  ForwardOutput infer = forward_infer(model, x);
  Matrix decoded = decode_latents(model, infer.mu);
  CHECK(oracle::rel_diff(decoded, infer.recon, 1.0) < 1e-6);

  Matrix zero = decode_latents(model, Matrix(2, 1));
  CHECK(zero.all_finite());

  // interpolation endpoints decode to the direct reconstructions
  Matrix za(2, 1), zb(2, 1);
  for (Index i = 0; i < 2; ++i) {
    za(i, 0) = infer.mu(i, 0);
    zb(i, 0) = infer.mu(i, 1);
  }
  Matrix path = interpolate(za, zb, 3);
  (void)path;
  Matrix da = decode_latents(model, za);
  for (Index i = 0; i < da.rows(); ++i)
    CHECK(da(i, 0) == doctest::Approx(infer.recon(i, 0)).epsilon(1e-10));

  TrainedModel no_basis = init_model(spec, 42);
  CHECK_THROWS_AS(decode_latents(no_basis, za), ValueError);
}
