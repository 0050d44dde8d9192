#include "vrrae/optim.hpp"

#include <cmath>
#include <numeric>

#include "vrrae/checkpoint.hpp"

namespace vrrae {

void adabelief_step(std::vector<NamedParam>& params, const std::vector<Matrix>& grads,
                    AdaBeliefState& state, double lr, double beta1, double beta2,
                    double eps) {
  if (grads.size() != params.size())
    throw ShapeError("adabelief_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto& p : params) {
      state.m.emplace_back(p.value.rows(), p.value.cols());
      state.v.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  for (Index i = 0; i < params.size(); ++i) {
    Matrix& p = params[i].value;
    const Matrix& g = grads[i];
    if (!p.same_shape(g))
      throw ShapeError("adabelief_step: gradient shape " + g.shape_str() +
                       " does not match parameter " + params[i].name + " " + p.shape_str());
    if (!g.all_finite())
      throw ValueError("adabelief_step: non-finite gradient for parameter " +
                       params[i].name);
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    for (Index e = 0; e < p.size(); ++e) {
      double ge = g.data()[e];
      double me = beta1 * m.data()[e] + (1.0 - beta1) * ge;
      double diff = ge - me;
      double ve = beta2 * v.data()[e] + (1.0 - beta2) * diff * diff;
      m.data()[e] = me;
      v.data()[e] = ve;
      p.data()[e] -= lr * (me / bc1) / (std::sqrt(ve / bc2) + eps);
    }
  }
}

namespace {

Matrix gather_columns(const Matrix& data, const std::vector<Index>& perm, Index start,
                      Index len) {
  Matrix out(data.rows(), len);
  for (Index j = 0; j < len; ++j) {
    auto src = data.col(perm[start + j]);
    auto dst = out.col(j);
    for (Index i = 0; i < src.size(); ++i) dst[i] = src[i];
  }
  return out;
}

// Batch-mean reconstruction loss under the epoch protocol (same batching,
// fresh noise for variational variants), without updates. The yardstick for
// "loss at initialization".
double batch_mean_rec(const TrainedModel& model, const Matrix& data, Index batch_size,
                      Rng& rng) {
  const ModelSpec& spec = model.spec;
  const bool svd_fam = is_svd_family(spec.variant);
  const bool variational = is_variational(spec.variant);
  const Index n = data.cols();
  std::vector<Index> ident(n);
  std::iota(ident.begin(), ident.end(), Index{0});
  double acc = 0.0;
  Index batches = 0;
  for (Index start = 0; start < n; start += batch_size) {
    Index len = std::min(batch_size, n - start);
    if (svd_fam && len < batch_size) break;
    Matrix xb = gather_columns(data, ident, start, len);
    Graph g;
    ForwardGraph fg;
    if (variational) {
      Matrix eps = rng.normal_matrix(spec.bottleneck, len);
      fg = build_forward_graph(g, model, xb, &eps);
    } else {
      fg = build_forward_graph(g, model, xb, nullptr);
    }
    acc += rec_loss(xb, g.value(fg.recon));
    ++batches;
  }
  return acc / static_cast<double>(batches);
}

}  // namespace

LatentSummary latent_summary(const TrainedModel& model, const Matrix& data) {
  const ModelSpec& spec = model.spec;
  LatentSummary out;
  if (is_svd_family(spec.variant)) {
    Matrix y = encode_eval(model, data);
    TruncatedFactors f = truncated_svd(y, spec.bottleneck);
    out.means = f.coefficients();
    if (spec.variant == Variant::NaiveRraeVae)
      out.means = linear_eval(model, "f", out.means);
    out.s_bar = f.s_bar;
  } else {
    Matrix latent = encode_eval(model, data);
    out.means =
        has_f_map(spec.variant) ? linear_eval(model, "f", latent) : std::move(latent);
    out.s_bar = row_norm_spectrum(out.means).norms;
  }
  return out;
}

TrainResult train(const ModelSpec& spec, const Matrix& data, const TrainConfig& cfg) {
  spec.validate();
  if (cfg.epochs < 1) throw ValueError("train: epochs must be >= 1");
  if (cfg.learning_rate <= 0.0) throw ValueError("train: learning rate must be positive");
  if (cfg.k_star != 0 && cfg.k_star != spec.bottleneck)
    throw ValueError("train: config k_star disagrees with the model spec");
  if (cfg.latent_dim != 0 && cfg.latent_dim != spec.latent_dim)
    throw ValueError("train: config latent_dim disagrees with the model spec");
  const Index n = data.cols();
  if (n < cfg.batch_size)
    throw ValueError("train: dataset has " + std::to_string(n) + " samples, batch size is " +
                     std::to_string(cfg.batch_size));
  const bool svd_fam = is_svd_family(spec.variant);
  const bool variational = is_variational(spec.variant);
  if (svd_fam && cfg.batch_size < spec.bottleneck)
    throw ValueError("train: batch size must be >= k* for SVD variants");

  TrainResult result;
  result.model = init_model(spec, cfg.seed);
  {
    Rng init_rng(derive_seed(cfg.seed, 0xbead));
    result.initial_rec = batch_mean_rec(result.model, data, cfg.batch_size, init_rng);
  }

  Rng rng(derive_seed(cfg.seed, 0x7ea1));
  AdaBeliefState opt_state;
  const double eff_beta = spec.effective_beta();
  const bool track_kl_gap =
      spec.variant == Variant::Vrrae || spec.variant == Variant::VrraeBetaZero;

  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});

  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(perm);

    EpochStats stats;
    Index batches = 0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      Index len = std::min(cfg.batch_size, n - start);
      if (svd_fam && len < cfg.batch_size) break;  // drop the partial batch

      Matrix xb = gather_columns(data, perm, start, len);
      Graph g;
      ForwardGraph fg;
      if (variational) {
        Matrix eps = rng.normal_matrix(spec.bottleneck, len);
        fg = build_forward_graph(g, result.model, xb, &eps);
      } else {
        fg = build_forward_graph(g, result.model, xb, nullptr);
      }
      LossNodes ln = build_loss_graph(g, spec.variant, fg.x, fg, eff_beta);

      double total = g.value(ln.total)(0, 0);
      if (!std::isfinite(total)) {
        std::string note;
        if (!cfg.divergence_dump_path.empty()) {
          save_checkpoint(result.model, cfg.divergence_dump_path);
          note = "; last checkpoint: " + cfg.divergence_dump_path;
        }
        throw ValueError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                         ", batch " + std::to_string(batches + 1) + note);
      }

      g.backward(ln.total);
      std::vector<Matrix> grads(result.model.params.size());
      for (Index i = 0; i < grads.size(); ++i) {
        Graph::NodeId id = fg.params[i];
        grads[i] = g.has_grad(id)
                       ? g.grad(id)
                       : Matrix(result.model.params[i].value.rows(),
                                result.model.params[i].value.cols());
      }

      stats.loss.rec += g.value(ln.rec)(0, 0);
      if (ln.kl != ForwardGraph::none) stats.loss.kl += g.value(ln.kl)(0, 0);
      stats.loss.total += total;
      if (track_kl_gap) {
        double direct = g.value(ln.kl)(0, 0);
        double closed = kl_vrrae_closed_form(fg.factors->s_bar, g.value(fg.sigma));
        stats.kl_route_gap =
            std::max(stats.kl_route_gap, std::abs(closed - direct) / (1.0 + std::abs(direct)));
      }
      ++batches;

      adabelief_step(result.model.params, grads, opt_state, cfg.learning_rate,
                     cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    }

    stats.loss.rec /= static_cast<double>(batches);
    stats.loss.kl /= static_cast<double>(batches);
    stats.loss.total /= static_cast<double>(batches);
    result.history.push_back(stats);

    const Index interval = std::max<Index>(1, cfg.collapse_diag_interval);
    if ((epoch + 1) % interval == 0 || epoch + 1 == cfg.epochs) {
      LatentSummary ls = latent_summary(result.model, data);
      result.collapse_history.push_back(
          collapse_diagnostic(ls.means, ls.s_bar, cfg.collapse_threshold));
    }
  }

  if (svd_fam) finalize_basis(result.model, data);
  return result;
}

void save_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError(path + ": cannot open for writing");
  std::fprintf(f, "epoch,rec,kl,total\n");
  for (Index i = 0; i < history.size(); ++i)
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g\n", i + 1, history[i].loss.rec,
                 history[i].loss.kl, history[i].loss.total);
  std::fclose(f);
}

}  // namespace vrrae
