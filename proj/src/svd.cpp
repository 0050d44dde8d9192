#include "vrrae/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vrrae {

namespace {

constexpr double kGapTau = 1e-8;      // clamp for 1/(s_i^2 - s_j^2) and 1/s_i
constexpr double kJacobiTol = 1e-15;  // relative off-diagonal convergence
constexpr int kMaxSweeps = 64;

double clamped_inverse(double x) {
  if (std::abs(x) < kGapTau) return (x < 0.0 ? -1.0 : 1.0) / kGapTau;
  return 1.0 / x;
}

// Orthogonalizes the columns of a (rows >= cols) in place by Jacobi
// rotations, accumulating them in v. Afterwards a = U * diag(s) with the
// original a equal to U * diag(s) * v'. Column squared norms are carried
// through the rotation identities; they are refreshed every few sweeps to
// shed accumulated roundoff.
void one_sided_jacobi(Matrix& a, Matrix& v) {
  const Index n = a.cols();
  const Index rows = a.rows();
  std::vector<double> norm2(n);
  auto refresh = [&] {
    for (Index j = 0; j < n; ++j) norm2[j] = dot(a.col(j), a.col(j));
  };
  refresh();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (sweep > 0 && sweep % 4 == 0) refresh();
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        double app = norm2[p];
        double aqq = norm2[q];
        double apq = dot(a.col(p), a.col(q));
        double denom = std::sqrt(app * aqq);
        if (denom == 0.0 || std::abs(apq) <= kJacobiTol * denom) continue;
        rotated = true;
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        double* ap = a.data() + p * rows;
        double* aq = a.data() + q * rows;
        for (Index i = 0; i < rows; ++i) {
          double xp = ap[i], xq = aq[i];
          ap[i] = c * xp - s * xq;
          aq[i] = s * xp + c * xq;
        }
        double* vp = v.data() + p * n;
        double* vq = v.data() + q * n;
        for (Index i = 0; i < n; ++i) {
          double xp = vp[i], xq = vq[i];
          vp[i] = c * xp - s * xq;
          vq[i] = s * xp + c * xq;
        }
        norm2[p] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
        norm2[q] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
      }
    }
    if (!rotated) break;
  }
}

// Fills zero-norm columns of u (flagged in needs_fill) with canonical basis
// vectors orthogonalized against every other column. Deterministic.
void complete_orthonormal_columns(Matrix& u, const std::vector<bool>& needs_fill) {
  const Index rows = u.rows();
  const Index cols = u.cols();
  Index probe = 0;
  for (Index j = 0; j < cols; ++j) {
    if (!needs_fill[j]) continue;
    while (true) {
      if (probe >= rows)
        throw ValueError("svd: failed to complete an orthonormal basis");
      std::vector<double> cand(rows, 0.0);
      cand[probe] = 1.0;
      ++probe;
      // two Gram-Schmidt passes against the already-valid columns
      for (int pass = 0; pass < 2; ++pass) {
        for (Index c = 0; c < cols; ++c) {
          if (c == j || (needs_fill[c] && c > j)) continue;
          double proj = 0.0;
          for (Index i = 0; i < rows; ++i) proj += cand[i] * u(i, c);
          for (Index i = 0; i < rows; ++i) cand[i] -= proj * u(i, c);
        }
      }
      double norm = std::sqrt(dot(cand, cand));
      if (norm > 0.5) {
        for (Index i = 0; i < rows; ++i) u(i, j) = cand[i] / norm;
        break;
      }
    }
  }
}

// Largest-magnitude entry of each u column made positive; the paired vt row
// flips with it so the product is unchanged.
void fix_signs(Matrix& u, Matrix& vt) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index arg = 0;
    double best = 0.0;
    for (Index i = 0; i < u.rows(); ++i) {
      double m = std::abs(u(i, j));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    if (u(arg, j) < 0.0) {
      for (Index i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
      for (Index c = 0; c < vt.cols(); ++c) vt(j, c) = -vt(j, c);
    }
  }
}

}  // namespace

Matrix TruncatedFactors::reconstruct() const { return matmul(u_bar, coefficients()); }

Matrix TruncatedFactors::coefficients() const {
  Matrix alpha = vt_bar;
  for (Index i = 0; i < alpha.rows(); ++i)
    for (Index j = 0; j < alpha.cols(); ++j) alpha(i, j) *= s_bar[i];
  return alpha;
}

TruncatedFactors SvdFactors::truncate(Index k) const {
  TruncatedFactors f;
  f.u_bar = Matrix(u.rows(), k);
  f.vt_bar = Matrix(k, vt.cols());
  f.s_bar.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k));
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < u.rows(); ++i) f.u_bar(i, j) = u(i, j);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < vt.cols(); ++j) f.vt_bar(i, j) = vt(i, j);
  return f;
}

SvdFactors full_svd(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw ValueError("full_svd: empty matrix");
  if (!m.all_finite()) throw ValueError("full_svd: input contains non-finite values");

  const bool wide = m.cols() > m.rows();
  Matrix a = wide ? transpose(m) : m;  // rows >= cols
  const Index p = a.cols();
  Matrix v = Matrix::identity(p);
  one_sided_jacobi(a, v);

  std::vector<double> norms(p);
  for (Index j = 0; j < p; ++j) norms[j] = column_norm(a, j);
  std::vector<Index> order(p);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return norms[x] > norms[y]; });

  double s_max = norms.empty() ? 0.0 : norms[order[0]];
  const double zero_tol = s_max * 1e-13;

  SvdFactors out;
  out.s.resize(p);
  Matrix left(a.rows(), p);   // orthonormal columns of the working matrix
  Matrix right(p, p);         // the accumulated rotations, reordered
  std::vector<bool> needs_fill(p, false);
  for (Index j = 0; j < p; ++j) {
    Index src = order[j];
    out.s[j] = norms[src];
    if (norms[src] > zero_tol && norms[src] > 0.0) {
      for (Index i = 0; i < a.rows(); ++i) left(i, j) = a(i, src) / norms[src];
    } else {
      out.s[j] = 0.0;
      needs_fill[j] = true;
    }
    for (Index i = 0; i < p; ++i) right(i, j) = v(i, src);
  }
  complete_orthonormal_columns(left, needs_fill);

  if (wide) {
    // m' = left * diag(s) * right'  =>  m = right * diag(s) * left'
    out.u = right;
    out.vt = transpose(left);
  } else {
    out.u = left;
    out.vt = transpose(right);
  }
  fix_signs(out.u, out.vt);
  return out;
}

TruncatedFactors truncated_svd(const Matrix& m, Index k) {
  const Index p = std::min(m.rows(), m.cols());
  if (k < 1 || k > p)
    throw ValueError("truncated_svd: rank " + std::to_string(k) + " out of range for " +
                     m.shape_str());
  return full_svd(m).truncate(k);
}

Matrix svd_backward_full(const SvdFactors& full, Index k, const Matrix* d_u,
                         const std::vector<double>* d_s, const Matrix* d_vt) {
  const Index rows = full.u.rows();
  const Index cols = full.vt.cols();
  const Index p = full.s.size();
  const std::vector<double>& s = full.s;

  // Zero-padded upstream gradients: Gu rows x p, gs p, Gv cols x p.
  Matrix gu(rows, p);
  if (d_u)
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < rows; ++i) gu(i, j) = (*d_u)(i, j);
  std::vector<double> gs(p, 0.0);
  if (d_s)
    for (Index i = 0; i < k; ++i) gs[i] = (*d_s)[i];
  Matrix gv(cols, p);
  if (d_vt)
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < cols; ++j) gv(j, i) = (*d_vt)(i, j);

  Matrix v = transpose(full.vt);  // cols x p

  // dM = U diag(gs) V'
  //    + U [ (F o (P - P')) S + S (F o (Q - Q')) ] V'
  //    + (I - U U') Gu S^{-1} V'
  //    + U S^{-1} Gv' (I - V V')
  // with P = U'Gu, Q = V'Gv, F_ij = 1/(s_j^2 - s_i^2) clamped.
  Matrix p_mat = matmul_tn(full.u, gu);
  Matrix q_mat = matmul_tn(v, gv);

  Matrix core(p, p);
  for (Index i = 0; i < p; ++i) core(i, i) = gs[i];
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (i == j) continue;
      double f = clamped_inverse(s[j] * s[j] - s[i] * s[i]);
      core(i, j) += f * ((p_mat(i, j) - p_mat(j, i)) * s[j] + s[i] * (q_mat(i, j) - q_mat(j, i)));
    }
  }
  Matrix dm = matmul(full.u, matmul_nt(core, v));

  // components of Gu/Gv orthogonal to the computed subspaces
  Matrix gu_sinv = gu;
  for (Index j = 0; j < p; ++j) {
    double inv = clamped_inverse(s[j]);
    for (Index i = 0; i < rows; ++i) gu_sinv(i, j) *= inv;
  }
  Matrix proj_u = matmul(full.u, matmul_tn(full.u, gu_sinv));
  add_in_place(dm, matmul_nt(subtract(gu_sinv, proj_u), v));

  Matrix gv_sinv = gv;
  for (Index j = 0; j < p; ++j) {
    double inv = clamped_inverse(s[j]);
    for (Index i = 0; i < cols; ++i) gv_sinv(i, j) *= inv;
  }
  Matrix proj_v = matmul(v, matmul_tn(v, gv_sinv));
  add_in_place(dm, matmul(full.u, transpose(subtract(gv_sinv, proj_v))));

  return dm;
}

Matrix svd_backward(const Matrix& m, const TruncatedFactors& factors, const Matrix* d_u,
                    const std::vector<double>* d_s, const Matrix* d_vt) {
  return svd_backward_full(full_svd(m), factors.rank(), d_u, d_s, d_vt);
}

double orthonormality_defect(const Matrix& basis) {
  Matrix gram = matmul_tn(basis, basis);
  double worst = 0.0;
  for (Index i = 0; i < gram.rows(); ++i)
    for (Index j = 0; j < gram.cols(); ++j) {
      double target = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(gram(i, j) - target));
    }
  return worst;
}

Matrix project(const Matrix& m, const Matrix& basis) {
  if (basis.rows() != m.rows())
    throw ShapeError("project: basis " + basis.shape_str() + " does not match data " +
                     m.shape_str());
  double defect = orthonormality_defect(basis);
  if (defect > 1e-6)
    throw ValueError("project: basis columns not orthonormal (defect " +
                     std::to_string(defect) + ")");
  return matmul_tn(basis, m);
}

}  // namespace vrrae
