#pragma once

#include <vector>

#include "vrrae/graph.hpp"
#include "vrrae/model.hpp"

namespace vrrae {

struct LossBreakdown {
  double rec = 0.0;    // reconstruction term
  double kl = 0.0;     // divergence, pre-beta; 0 for deterministic variants
  double total = 0.0;  // rec + beta * kl
};

/// Batch-mean squared L2: (1/B) sum_j ||x_j - xt_j||^2.
double rec_loss(const Matrix& x, const Matrix& xt);

/// KL(N(mu, sigma^2) || N(0, I)) summed over entries, divided by batch:
/// -(0.5/B) sum(1 + log(sigma o sigma) - mu o mu - sigma o sigma).
/// Returned as the nonnegative divergence being minimized. Zero sigma
/// entries are rejected (log singularity).
double kl_gaussian(const Matrix& mu, const Matrix& sigma);

/// Same KL with mu = diag(s_bar) * Vt_bar for orthonormal Vt_bar, computed
/// from the singular values alone: sum(mu o mu) = sum(s_bar^2).
double kl_vrrae_closed_form(const std::vector<double>& s_bar, const Matrix& sigma);

/// Composes the per-variant objective from a forward output.
LossBreakdown total_loss(Variant variant, const Matrix& x, const ForwardOutput& out,
                         double beta);

struct LossNodes {
  Graph::NodeId rec = ForwardGraph::none;
  Graph::NodeId kl = ForwardGraph::none;    // none for deterministic variants
  Graph::NodeId total = ForwardGraph::none;
};

/// Tape version used by training; mirrors total_loss.
LossNodes build_loss_graph(Graph& g, Variant variant, Graph::NodeId x, const ForwardGraph& fg,
                           double beta);

}  // namespace vrrae
