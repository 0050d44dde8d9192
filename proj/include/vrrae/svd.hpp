#pragma once

#include <vector>

#include "vrrae/matrix.hpp"

namespace vrrae {

/// Rank-k* factors of a latent matrix: U_bar (L x k*, orthonormal columns),
/// s_bar (descending, >= 0), Vt_bar (k* x B, orthonormal rows). Sign
/// convention: the largest-magnitude entry of each U_bar column is positive.
struct TruncatedFactors {
  Matrix u_bar;
  std::vector<double> s_bar;
  Matrix vt_bar;

  Index rank() const { return s_bar.size(); }
  /// U_bar * diag(s_bar) * Vt_bar.
  Matrix reconstruct() const;
  /// diag(s_bar) * Vt_bar, the bottleneck coefficients.
  Matrix coefficients() const;
};

/// Full thin SVD, p = min(rows, cols) triplets.
struct SvdFactors {
  Matrix u;                // rows x p
  std::vector<double> s;   // p, descending
  Matrix vt;               // p x cols

  TruncatedFactors truncate(Index k) const;
};

/// Thin SVD by one-sided Jacobi rotations. Deterministic: fixed sweep order,
/// stable descending sort, sign fixed per column. Columns for zero singular
/// values are completed to an orthonormal set from canonical basis vectors.
SvdFactors full_svd(const Matrix& m);

/// Best rank-k approximation factors of m (Frobenius-optimal).
/// Requires 1 <= k <= min(rows, cols) and finite entries.
TruncatedFactors truncated_svd(const Matrix& m, Index k);

/// Reverse-mode gradient of a scalar function of the rank-k factors of m.
/// Upstream gradients may be null (treated as zero). Gap factors
/// 1/(s_i^2 - s_j^2) and the inverse singular values are clamped in magnitude
/// at 1/tau, tau = 1e-8, so the map is total on degenerate spectra.
Matrix svd_backward(const Matrix& m, const TruncatedFactors& factors, const Matrix* d_u,
                    const std::vector<double>* d_s, const Matrix* d_vt);

/// Same, reusing previously computed full factors (the tape path).
Matrix svd_backward_full(const SvdFactors& full, Index k, const Matrix* d_u,
                         const std::vector<double>* d_s, const Matrix* d_vt);

/// basis' * m; requires basis columns orthonormal within 1e-6.
Matrix project(const Matrix& m, const Matrix& basis);

/// max |B'B - I| over entries; 0 for perfectly orthonormal columns.
double orthonormality_defect(const Matrix& basis);

}  // namespace vrrae
