#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrrae/dataset.hpp"
#include "vrrae/generate.hpp"
#include "vrrae/metrics.hpp"
#include "vrrae/optim.hpp"

namespace vrrae {

/// The shifted-Gaussian benchmark: every variant trained over several seeds,
/// scored on reconstruction of a shared random test set and on GMM-sampled
/// random generation.
struct ExperimentConfig {
  BumpParams bumps;
  Index latent_dim = 200;  // L
  Index bottleneck = 2;    // k*
  std::vector<Index> encoder_hidden{1024};
  std::vector<Index> decoder_hidden{1024, 1024};
  Index epochs = 1280;
  Index batch_size = 64;
  double learning_rate = 1e-4;
  double beta_vae = 1e-2;    // VAE and VAE (f=I)
  double beta_vrrae = 1e-3;  // VRRAE and RRAE+VAE
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool ablation = false;  // add RRAE+VAE, VAE (f=I), VRRAE (beta=0)
  Index test_count = 10000;
  Index gen_count = 1250;
  Index gmm_components = 5;
  double collapse_threshold = 0.05;
  Index threads = 0;               // 0: hardware concurrency
  std::string checkpoint_dir;      // nonempty: persist + resume per run
  std::uint64_t test_set_seed = 9000;

  std::vector<Variant> variants() const;
  double beta_for(Variant v) const;
};

struct RunOutcome {
  Variant variant = Variant::Ae;
  std::uint64_t seed = 0;
  double test_err_mean = 0.0;
  double test_err_std = 0.0;
  double gen_err_mean = 0.0;
  double gen_err_std = 0.0;
  Index collapsed_dims = 0;
  double final_rec = 0.0;
  double max_kl_route_gap = 0.0;  // VRRAE variants; 0 otherwise
  bool resumed = false;
};

struct VariantSummary {
  Variant variant = Variant::Ae;
  double test_mean = 0.0, test_std = 0.0;  // across seeds, of per-seed means
  double gen_mean = 0.0, gen_std = 0.0;
  Index seeds_with_collapse = 0;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;  // variant-major, seed-minor
  std::vector<VariantSummary> summaries;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// One run (train + score); exposed for the CLI train/eval commands.
RunOutcome score_model(const ExperimentConfig& cfg, const TrainedModel& model,
                       double max_kl_route_gap, std::uint64_t seed);

/// Text table: one row per variant and metric, mean +- std over seeds.
std::string format_table(const ExperimentResult& result);

/// Reconstructions of x under the inference path, evaluated in column chunks.
Matrix infer_recon_chunked(const TrainedModel& model, const Matrix& x, Index chunk = 2000);

}  // namespace vrrae
