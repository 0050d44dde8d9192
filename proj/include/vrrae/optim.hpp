#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrrae/loss.hpp"
#include "vrrae/metrics.hpp"
#include "vrrae/model.hpp"

namespace vrrae {

struct TrainConfig {
  Index epochs = 1;
  Index batch_size = 64;
  double learning_rate = 1e-4;
  double beta = 0.0;  // KL weight
  std::uint64_t seed = 0;
  Index k_star = 0;    // informational copies of the model dims; validated
  Index latent_dim = 0;  // against the ModelSpec when nonzero
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-16;
  bool shuffle = true;
  double collapse_threshold = 0.05;
  /// Epochs between full-dataset collapse diagnostics (1 = every epoch);
  /// the final epoch is always included.
  Index collapse_diag_interval = 1;
  /// When nonempty, the pre-divergence model is dumped here before aborting.
  std::string divergence_dump_path;
};

struct AdaBeliefState {
  std::vector<Matrix> m;  // first moment
  std::vector<Matrix> v;  // belief (variance of the gradient around m)
  std::uint64_t step = 0;
};

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2)(g - m)^2;  bias-corrected;
/// param <- param - lr * m_hat / (sqrt(v_hat) + eps).
void adabelief_step(std::vector<NamedParam>& params, const std::vector<Matrix>& grads,
                    AdaBeliefState& state, double lr, double beta1, double beta2,
                    double eps);

struct EpochStats {
  LossBreakdown loss;        // means over the epoch's batches
  double kl_route_gap = 0.0;  // max |closed-form - direct| / (1 + |direct|); VRRAE only
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochStats> history;
  std::vector<CollapseReport> collapse_history;  // one per epoch
  /// Batch-mean rec loss at the initial parameters, measured with the
  /// same batching and sampling protocol as a training epoch.
  double initial_rec = 0.0;
};

/// Seeded minibatch training per the experimental protocol: a fresh shuffled
/// permutation each epoch, fresh reparameterization noise per batch, the
/// trailing partial batch dropped for SVD-family variants and kept otherwise,
/// per-epoch collapse diagnostics on the full dataset, and the basis
/// finalized from one full-data SVD at the end. Everything is determined by
/// (seed, config, data).
TrainResult train(const ModelSpec& spec, const Matrix& data, const TrainConfig& cfg);

/// Latent means and singular values of the deterministic full-data pass;
/// non-SVD variants report row norms of the means as the spectrum.
struct LatentSummary {
  Matrix means;  // k* x N
  std::vector<double> s_bar;
};
LatentSummary latent_summary(const TrainedModel& model, const Matrix& data);

/// "epoch,rec,kl,total" rows, full precision.
void save_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace vrrae
