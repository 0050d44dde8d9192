#include "vrrae/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <fstream>
#include <sstream>
#include <thread>

#include "vrrae/checkpoint.hpp"

namespace vrrae {

std::vector<Variant> ExperimentConfig::variants() const {
  std::vector<Variant> v{Variant::Ae, Variant::Vae, Variant::Rrae, Variant::Vrrae};
  if (ablation) {
    v.push_back(Variant::NaiveRraeVae);
    v.push_back(Variant::VaeIdentityMean);
    v.push_back(Variant::VrraeBetaZero);
  }
  return v;
}

double ExperimentConfig::beta_for(Variant v) const {
  switch (v) {
    case Variant::Vae:
    case Variant::VaeIdentityMean:
      return beta_vae;
    case Variant::Vrrae:
    case Variant::NaiveRraeVae:
      return beta_vrrae;
    default:
      return 0.0;  // deterministic variants and VRRAE (beta=0)
  }
}

Matrix infer_recon_chunked(const TrainedModel& model, const Matrix& x, Index chunk) {
  Matrix recon(x.rows(), x.cols());
  for (Index start = 0; start < x.cols(); start += chunk) {
    Index len = std::min(chunk, x.cols() - start);
    Matrix xb(x.rows(), len);
    for (Index j = 0; j < len; ++j) {
      auto src = x.col(start + j);
      auto dst = xb.col(j);
      for (Index i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
    Matrix rb = forward_infer(model, xb).recon;
    for (Index j = 0; j < len; ++j) {
      auto src = rb.col(j);
      auto dst = recon.col(start + j);
      for (Index i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
  }
  return recon;
}

namespace {

ModelSpec spec_for(const ExperimentConfig& cfg, Variant v) {
  ModelSpec spec;
  spec.variant = v;
  spec.input_dim = cfg.bumps.image_size * cfg.bumps.image_size;
  spec.latent_dim = is_svd_family(v) ? cfg.latent_dim : cfg.bottleneck;
  spec.bottleneck = cfg.bottleneck;
  spec.encoder_hidden = cfg.encoder_hidden;
  spec.decoder_hidden = cfg.decoder_hidden;
  spec.beta = cfg.beta_for(v);
  return spec;
}

std::string run_stem(const ExperimentConfig& cfg, Variant v, std::uint64_t seed) {
  return cfg.checkpoint_dir + "/" + variant_id(v) + "_seed" + std::to_string(seed);
}

// Cached outcomes are only valid for the exact configuration that made them.
std::uint64_t config_fingerprint(const ExperimentConfig& cfg, Variant v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    h ^= x;
    h *= 0x100000001b3ULL;
  };
  auto mix_d = [&](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    mix(bits);
  };
  mix(static_cast<std::uint64_t>(v));
  mix(cfg.latent_dim);
  mix(cfg.bottleneck);
  for (Index w : cfg.encoder_hidden) mix(w);
  for (Index w : cfg.decoder_hidden) mix(w);
  mix(cfg.epochs);
  mix(cfg.batch_size);
  mix_d(cfg.learning_rate);
  mix_d(cfg.beta_for(v));
  mix(cfg.test_count);
  mix(cfg.gen_count);
  mix(cfg.gmm_components);
  mix_d(cfg.collapse_threshold);
  mix(cfg.bumps.grid_points);
  mix(cfg.bumps.image_size);
  mix_d(cfg.bumps.sigma);
  mix_d(cfg.bumps.magnitude);
  mix_d(cfg.bumps.center_min);
  mix_d(cfg.bumps.center_max);
  mix(cfg.test_set_seed);
  return h;
}

bool load_outcome_meta(const std::string& path, RunOutcome& out,
                       std::uint64_t fingerprint) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  int seen = 0;
  bool fingerprint_ok = false;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    if (key == "config") {
      fingerprint_ok = line.substr(eq + 1) == std::to_string(fingerprint);
      continue;
    }
    double val = std::stod(line.substr(eq + 1));
    ++seen;
    if (key == "test_err_mean") out.test_err_mean = val;
    else if (key == "test_err_std") out.test_err_std = val;
    else if (key == "gen_err_mean") out.gen_err_mean = val;
    else if (key == "gen_err_std") out.gen_err_std = val;
    else if (key == "collapsed_dims") out.collapsed_dims = static_cast<Index>(val);
    else if (key == "final_rec") out.final_rec = val;
    else if (key == "max_kl_route_gap") out.max_kl_route_gap = val;
    else --seen;
  }
  return fingerprint_ok && seen >= 7;
}

void save_outcome_meta(const std::string& path, const RunOutcome& out,
                       std::uint64_t fingerprint) {
  std::ofstream f(path);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << "config=" << fingerprint << "\n";
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    f << key << "=" << buf << "\n";
  };
  put("test_err_mean", out.test_err_mean);
  put("test_err_std", out.test_err_std);
  put("gen_err_mean", out.gen_err_mean);
  put("gen_err_std", out.gen_err_std);
  f << "collapsed_dims=" << out.collapsed_dims << "\n";
  put("final_rec", out.final_rec);
  put("max_kl_route_gap", out.max_kl_route_gap);
}

}  // namespace

RunOutcome score_model(const ExperimentConfig& cfg, const TrainedModel& model,
                       double max_kl_route_gap, std::uint64_t seed) {
  RunOutcome out;
  out.variant = model.spec.variant;
  out.seed = seed;
  out.max_kl_route_gap = max_kl_route_gap;

  Dataset train_set = gen_gaussian_bumps(cfg.bumps);
  Rng test_rng(derive_seed(cfg.test_set_seed, 0x7e57));
  Dataset test_set = gen_test_bumps(cfg.bumps, cfg.test_count, test_rng);

  Matrix recon = infer_recon_chunked(model, test_set.x);
  RelativeErrorStats test_stats = relative_error(test_set.x, recon);
  out.test_err_mean = test_stats.mean;
  out.test_err_std = test_stats.stddev;

  // generation: GMM over the inference-path coefficients of the training set
  ForwardOutput train_out = forward_infer(model, train_set.x);
  Rng gmm_rng(derive_seed(seed, 0x63a1));
  GaussianMixture gmm = gmm_fit(train_out.mu, cfg.gmm_components, gmm_rng);
  Matrix sampled = gmm_sample(gmm, cfg.gen_count, gmm_rng);
  Matrix generated = decode_latents(model, sampled);
  double mean = 0.0;
  std::vector<double> errs(generated.cols());
  for (Index j = 0; j < generated.cols(); ++j) {
    errs[j] = random_gen_error(generated.col(j), cfg.bumps);
    mean += errs[j];
  }
  mean /= static_cast<double>(errs.size());
  double var = 0.0;
  for (double e : errs) var += (e - mean) * (e - mean);
  out.gen_err_mean = mean;
  out.gen_err_std = std::sqrt(var / static_cast<double>(errs.size()));

  // posterior-collapse diagnostic over the training means
  CollapseReport report = collapse_diagnostic(
      train_out.mu, row_norm_spectrum(train_out.mu).norms, cfg.collapse_threshold);
  out.collapsed_dims = report.flagged_count();

  out.final_rec = rec_loss(train_set.x, infer_recon_chunked(model, train_set.x));
  return out;
}

namespace {

RunOutcome execute_run(const ExperimentConfig& cfg, Variant variant, std::uint64_t seed) {
  const bool persist = !cfg.checkpoint_dir.empty();
  std::string stem = persist ? run_stem(cfg, variant, seed) : "";

  if (persist) {
    RunOutcome cached;
    cached.variant = variant;
    cached.seed = seed;
    std::error_code ec;
    if (std::filesystem::exists(stem + ".ckpt", ec) &&
        load_outcome_meta(stem + ".meta", cached, config_fingerprint(cfg, variant))) {
      try {
        load_checkpoint(stem + ".ckpt");  // validates integrity
        cached.resumed = true;
        return cached;
      } catch (const Error&) {
        // fall through and retrain
      }
    }
  }

  Dataset train_set = gen_gaussian_bumps(cfg.bumps);
  ModelSpec spec = spec_for(cfg, variant);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.beta = spec.beta;
  tc.seed = seed;
  tc.collapse_threshold = cfg.collapse_threshold;
  tc.collapse_diag_interval = 16;
  TrainResult tr = train(spec, train_set.x, tc);

  double gap = 0.0;
  for (const auto& row : tr.history) gap = std::max(gap, row.kl_route_gap);
  RunOutcome out = score_model(cfg, tr.model, gap, seed);

  if (persist) {
    save_checkpoint(tr.model, stem + ".ckpt");
    save_history_csv(stem + "_loss.csv", tr.history);
    save_outcome_meta(stem + ".meta", out, config_fingerprint(cfg, variant));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (!cfg.checkpoint_dir.empty())
    std::filesystem::create_directories(cfg.checkpoint_dir);

  std::vector<Variant> variants = cfg.variants();
  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : variants)
    for (std::uint64_t s : cfg.seeds) jobs.push_back({v, s});

  ExperimentResult result;
  result.runs.resize(jobs.size());

  Index workers = cfg.threads > 0 ? cfg.threads : std::thread::hardware_concurrency();
  workers = std::max<Index>(1, std::min<Index>(workers, jobs.size()));

  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index j = w; j < jobs.size(); j += workers) {
        try {
          result.runs[j] = execute_run(cfg, jobs[j].variant, jobs[j].seed);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  for (Variant v : variants) {
    VariantSummary s;
    s.variant = v;
    std::vector<double> tests, gens;
    for (const auto& run : result.runs) {
      if (run.variant != v) continue;
      tests.push_back(run.test_err_mean);
      gens.push_back(run.gen_err_mean);
      if (run.collapsed_dims > 0) ++s.seeds_with_collapse;
    }
    auto mean_std = [](const std::vector<double>& xs, double& mean, double& stddev) {
      mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      stddev = std::sqrt(var / static_cast<double>(xs.size()));
    };
    mean_std(tests, s.test_mean, s.test_std);
    mean_std(gens, s.gen_mean, s.gen_std);
    result.summaries.push_back(s);
  }
  return result;
}

std::string format_table(const ExperimentResult& result) {
  std::ostringstream os;
  char buf[128];
  os << "model            metric        mean     std\n";
  os << "-----            ------        ----     ---\n";
  for (const auto& s : result.summaries) {
    std::snprintf(buf, sizeof buf, "%-16s %-10s %8.2f %7.2f\n",
                  variant_label(s.variant).c_str(), "test(%)", s.test_mean, s.test_std);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-16s %-10s %8.2f %7.2f\n",
                  variant_label(s.variant).c_str(), "gen(%)", s.gen_mean, s.gen_std);
    os << buf;
  }
  return os.str();
}

}  // namespace vrrae
