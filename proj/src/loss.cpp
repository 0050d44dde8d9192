#include "vrrae/loss.hpp"

#include <cmath>

namespace vrrae {

double rec_loss(const Matrix& x, const Matrix& xt) {
  if (!x.same_shape(xt))
    throw ShapeError("rec_loss: shapes " + x.shape_str() + " and " + xt.shape_str() +
                     " differ");
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    double d = x.data()[i] - xt.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(x.cols());
}

double kl_gaussian(const Matrix& mu, const Matrix& sigma) {
  if (!mu.same_shape(sigma))
    throw ShapeError("kl_gaussian: shapes " + mu.shape_str() + " and " + sigma.shape_str() +
                     " differ");
  double s = 0.0;
  for (Index i = 0; i < mu.size(); ++i) {
    double m = mu.data()[i];
    double sg = sigma.data()[i];
    if (sg == 0.0) throw ValueError("kl_gaussian: zero sigma entry (log singularity)");
    double v = sg * sg;
    s += 1.0 + std::log(v) - m * m - v;
  }
  return -0.5 * s / static_cast<double>(mu.cols());
}

double kl_vrrae_closed_form(const std::vector<double>& s_bar, const Matrix& sigma) {
  double s = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) {
    double sg = sigma.data()[i];
    if (sg == 0.0)
      throw ValueError("kl_vrrae_closed_form: zero sigma entry (log singularity)");
    double v = sg * sg;
    s += 1.0 + std::log(v) - v;
  }
  for (double sv : s_bar) s -= sv * sv;
  return -0.5 * s / static_cast<double>(sigma.cols());
}

LossBreakdown total_loss(Variant variant, const Matrix& x, const ForwardOutput& out,
                         double beta) {
  double eff_beta = variant == Variant::VrraeBetaZero ? 0.0 : beta;
  LossBreakdown lb;
  lb.rec = rec_loss(x, out.recon);
  if (is_variational(variant)) lb.kl = kl_gaussian(out.mu, out.sigma);
  lb.total = lb.rec + eff_beta * lb.kl;
  return lb;
}

LossNodes build_loss_graph(Graph& g, Variant variant, Graph::NodeId x, const ForwardGraph& fg,
                           double beta) {
  double eff_beta = variant == Variant::VrraeBetaZero ? 0.0 : beta;
  const Index batch = g.value(x).cols();

  LossNodes nodes;
  Graph::NodeId diff = g.subtract(fg.recon, x);
  nodes.rec = g.scalar_mul(g.sum_all(g.square(diff)), 1.0 / static_cast<double>(batch));

  if (is_variational(variant)) {
    const Matrix& mu = g.value(fg.mu);
    Graph::NodeId ones = g.leaf(Matrix::ones(mu.rows(), mu.cols()));
    Graph::NodeId sig_sq = g.square(fg.sigma);
    Graph::NodeId inner =
        g.subtract(g.subtract(g.add(ones, g.log(sig_sq)), g.square(fg.mu)), sig_sq);
    nodes.kl = g.scalar_mul(g.sum_all(inner), -0.5 / static_cast<double>(batch));
    nodes.total = g.add(nodes.rec, g.scalar_mul(nodes.kl, eff_beta));
  } else {
    nodes.total = nodes.rec;
  }
  return nodes;
}

}  // namespace vrrae
