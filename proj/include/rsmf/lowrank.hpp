#ifndef RSMF_LOWRANK_HPP
#define RSMF_LOWRANK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "rsmf/dense.hpp"

namespace rsmf {

/// Rank-r factorization U * V^T of an m x n block. All construction
/// algorithms target a relative tolerance `tol`; the constant c in the
/// reconstruction bound ||M - U V^T||_F <= c * tol * ||M||_F depends on the
/// constructor: truncated_svd c = sqrt(rank cut) (spectral cut at tol),
/// aca c = 10, randomized_range and interpolative_decomposition c = 100.
struct LowRank {
  DenseMatrix U;  // m x r
  DenseMatrix V;  // n x r
  double tol = 0.0;
  bool converged = true;

  index_t rank() const { return U.cols(); }
  index_t rows() const { return U.rows(); }
  index_t cols() const { return V.rows(); }
  index_t stored_scalars() const { return rank() * (rows() + cols()); }

  DenseMatrix densify() const {
    if (rank() == 0) return DenseMatrix(rows(), cols());
    return matmul(U, V.transposed());
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (rank() == 0) return std::vector<double>(rows(), 0.0);
    return matvec(U, matvec_t(V, x));
  }

  std::vector<double> apply_t(const std::vector<double>& x) const {
    if (rank() == 0) return std::vector<double>(cols(), 0.0);
    return matvec(V, matvec_t(U, x));
  }
};

inline LowRank lowrank_zero(index_t m, index_t n, double tol) {
  return LowRank{DenseMatrix(m, 0), DenseMatrix(n, 0), tol, true};
}

namespace detail {

/// One-sided Jacobi SVD: rotates column pairs of A until mutually orthogonal,
/// so A = U * diag(sigma) * V^T with U the normalized columns. Accurate and
/// simple; it is the reference the faster compressors are tested against.
inline void jacobi_svd(DenseMatrix A, DenseMatrix& U, std::vector<double>& sigma, DenseMatrix& V) {
  const index_t m = A.rows(), n = A.cols();
  V = DenseMatrix::identity(n);
  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (index_t p = 0; p < n - 1; ++p)
      for (index_t q = p + 1; q < n; ++q) {
        double app = 0, aqq = 0, apq = 0;
        const double* cp = A.col(p);
        const double* cq = A.col(q);
        for (index_t i = 0; i < m; ++i) {
          app += cp[i] * cp[i];
          aqq += cq[i] * cq[i];
          apq += cp[i] * cq[i];
        }
        if (apq == 0.0 || std::abs(apq) <= 10.0 * eps * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (index_t i = 0; i < m; ++i) {
          const double xp = A(i, p), xq = A(i, q);
          A(i, p) = c * xp - s * xq;
          A(i, q) = s * xp + c * xq;
        }
        for (index_t i = 0; i < n; ++i) {
          const double vp = V(i, p), vq = V(i, q);
          V(i, p) = c * vp - s * vq;
          V(i, q) = s * vp + c * vq;
        }
      }
    if (!rotated) break;
  }
  sigma.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<index_t> order(static_cast<std::size_t>(n));
  for (index_t j = 0; j < n; ++j) {
    order[j] = j;
    double s = 0;
    const double* cj = A.col(j);
    for (index_t i = 0; i < m; ++i) s += cj[i] * cj[i];
    sigma[j] = std::sqrt(s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](index_t a, index_t b) { return sigma[a] > sigma[b]; });
  DenseMatrix Us(m, n), Vs(n, n);
  std::vector<double> ss(static_cast<std::size_t>(n));
  for (index_t j = 0; j < n; ++j) {
    const index_t src = order[j];
    ss[j] = sigma[src];
    for (index_t i = 0; i < m; ++i) Us(i, j) = ss[j] > 0 ? A(i, src) / ss[j] : 0.0;
    for (index_t i = 0; i < n; ++i) Vs(i, j) = V(i, src);
  }
  U = std::move(Us);
  V = std::move(Vs);
  sigma = std::move(ss);
}

/// Column-pivoted Householder QR. `pivots` lists original column indices in
/// selection order, `R` is upper triangular in that order, `Q` has `rank`
/// orthonormal columns. Columns stop being selected once the running
/// R-diagonal falls to rel_tol times the first one.
struct Cpqr {
  DenseMatrix Q;
  DenseMatrix R;
  std::vector<index_t> pivots;
  index_t rank = 0;
};

inline Cpqr cpqr(DenseMatrix A, double rel_tol, index_t max_rank = -1) {
  const index_t m = A.rows(), n = A.cols();
  const index_t kmax = std::min(m, n);
  if (max_rank < 0 || max_rank > kmax) max_rank = kmax;
  std::vector<index_t> pivots(static_cast<std::size_t>(n));
  for (index_t j = 0; j < n; ++j) pivots[j] = j;
  std::vector<double> colnorm2(static_cast<std::size_t>(n), 0.0);
  for (index_t j = 0; j < n; ++j) {
    const double* cj = A.col(j);
    for (index_t i = 0; i < m; ++i) colnorm2[j] += cj[i] * cj[i];
  }
  std::vector<std::vector<double>> reflectors;
  double first = 0.0;
  index_t k = 0;
  for (; k < max_rank; ++k) {
    index_t p = k;
    for (index_t j = k + 1; j < n; ++j)
      if (colnorm2[j] > colnorm2[p]) p = j;
    if (p != k) {
      for (index_t i = 0; i < m; ++i) std::swap(A(i, k), A(i, p));
      std::swap(colnorm2[k], colnorm2[p]);
      std::swap(pivots[k], pivots[p]);
    }
    double nrm = 0;
    for (index_t i = k; i < m; ++i) nrm += A(i, k) * A(i, k);
    nrm = std::sqrt(nrm);
    if (k == 0) first = nrm;
    if (nrm == 0.0 || (first > 0 && nrm <= rel_tol * first)) break;
    const double alpha = A(k, k) >= 0 ? -nrm : nrm;
    std::vector<double> v(static_cast<std::size_t>(m), 0.0);
    for (index_t i = k; i < m; ++i) v[i] = A(i, k);
    v[k] -= alpha;
    double vn2 = 0;
    for (index_t i = k; i < m; ++i) vn2 += v[i] * v[i];
    if (vn2 > 0) {
      for (index_t j = k; j < n; ++j) {
        double s = 0;
        for (index_t i = k; i < m; ++i) s += v[i] * A(i, j);
        s = 2.0 * s / vn2;
        for (index_t i = k; i < m; ++i) A(i, j) -= s * v[i];
      }
    }
    A(k, k) = alpha;
    reflectors.push_back(std::move(v));
    for (index_t j = k + 1; j < n; ++j) {
      colnorm2[j] -= A(k, j) * A(k, j);
      if (colnorm2[j] < 0) colnorm2[j] = 0;
    }
  }
  Cpqr out;
  out.rank = k;
  out.pivots = std::move(pivots);
  out.R = DenseMatrix(k, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < std::min(k, j + 1); ++i) out.R(i, j) = A(i, j);
  out.Q = DenseMatrix(m, k);
  for (index_t j = 0; j < k; ++j) out.Q(j, j) = 1.0;
  for (index_t r = k - 1; r >= 0; --r) {
    const auto& v = reflectors[r];
    double vn2 = 0;
    for (index_t i = r; i < m; ++i) vn2 += v[i] * v[i];
    if (vn2 == 0) continue;
    for (index_t j = 0; j < k; ++j) {
      double s = 0;
      for (index_t i = r; i < m; ++i) s += v[i] * out.Q(i, j);
      s = 2.0 * s / vn2;
      for (index_t i = r; i < m; ++i) out.Q(i, j) -= s * v[i];
    }
  }
  return out;
}

}  // namespace detail

/// Truncated SVD to relative spectral tolerance: rank is the smallest r with
/// sigma_{r+1} <= tol * sigma_1. The reference compressor (c = 1).
inline LowRank truncated_svd(const DenseMatrix& M, double tol) {
  if (M.empty()) return lowrank_zero(M.rows(), M.cols(), tol);
  DenseMatrix U, V;
  std::vector<double> sigma;
  const bool flip = M.rows() < M.cols();
  detail::jacobi_svd(flip ? M.transposed() : M, U, sigma, V);
  if (flip) std::swap(U, V);
  const double s1 = sigma.empty() ? 0.0 : sigma[0];
  index_t r = 0;
  while (r < static_cast<index_t>(sigma.size()) && sigma[r] > tol * s1 && sigma[r] > 0.0) ++r;
  LowRank lr;
  lr.tol = tol;
  lr.U = DenseMatrix(M.rows(), r);
  lr.V = DenseMatrix(M.cols(), r);
  for (index_t j = 0; j < r; ++j) {
    for (index_t i = 0; i < M.rows(); ++i) lr.U(i, j) = U(i, j) * sigma[j];
    for (index_t i = 0; i < M.cols(); ++i) lr.V(i, j) = V(i, j);
  }
  return lr;
}

/// Singular values only, largest first.
inline std::vector<double> singular_values(const DenseMatrix& M) {
  DenseMatrix U, V;
  std::vector<double> sigma;
  detail::jacobi_svd(M.rows() < M.cols() ? M.transposed() : M, U, sigma, V);
  return sigma;
}

/// Adaptive cross approximation with partial pivoting on the residual row.
/// Stops when |u_k||v_k| <= tol * |M|_est (running Frobenius estimate).
/// If the pivot search stagnates (all remaining residual rows exactly zero)
/// while a deterministic residual probe still exceeds the tolerance, the
/// factor is returned flagged unconverged; likewise when the rank budget
/// min(m, n) runs out before the estimate drops.
inline LowRank aca(const std::function<double(index_t, index_t)>& entry, index_t m, index_t n,
                   double tol) {
  LowRank lr = lowrank_zero(m, n, tol);
  if (m == 0 || n == 0) return lr;
  const index_t rmax = std::min(m, n);
  std::vector<std::vector<double>> us, vs;
  std::vector<char> row_used(static_cast<std::size_t>(m), 0);
  double norm2_est = 0.0;
  bool certified = false;
  int small_in_a_row = 0;
  index_t next_row = 0;

  auto residual_at = [&](index_t i, index_t j) {
    double r = entry(i, j);
    for (std::size_t k = 0; k < us.size(); ++k) r -= us[k][i] * vs[k][j];
    return r;
  };

  while (static_cast<index_t>(us.size()) < rmax) {
    index_t i = -1, j = -1;
    std::vector<double> vrow(static_cast<std::size_t>(n));
    for (index_t tries = 0; tries < m; ++tries) {
      index_t cand = (next_row + tries) % m;
      if (row_used[cand]) continue;
      for (index_t c = 0; c < n; ++c) vrow[c] = residual_at(cand, c);
      index_t best = 0;
      for (index_t c = 1; c < n; ++c)
        if (std::abs(vrow[c]) > std::abs(vrow[best])) best = c;
      if (std::abs(vrow[best]) > 0.0) {
        i = cand;
        j = best;
        break;
      }
      row_used[cand] = 1;  // exactly zero residual row, never revisit
    }
    if (i < 0) break;  // stagnated; probe below decides the flag
    row_used[i] = 1;
    next_row = (i + 1) % m;
    const double pivot = vrow[j];
    std::vector<double> ucol(static_cast<std::size_t>(m));
    for (index_t r = 0; r < m; ++r) ucol[r] = residual_at(r, j);
    for (auto& v : vrow) v /= pivot;
    const double nu = norm2(ucol), nv = norm2(vrow);
    double cross = 0.0;
    for (std::size_t k = 0; k < us.size(); ++k) cross += dot(us[k], ucol) * dot(vs[k], vrow);
    norm2_est += nu * nu * nv * nv + 2.0 * cross;
    if (norm2_est < 0) norm2_est = nu * nu * nv * nv;
    us.push_back(std::move(ucol));
    vs.push_back(std::move(vrow));
    // Two consecutive crosses under the threshold certify convergence; a
    // single small pivot on a lucky row is not trusted.
    if (nu * nv <= tol * std::sqrt(std::max(norm2_est, 0.0))) {
      if (++small_in_a_row >= 2) {
        certified = true;
        break;
      }
    } else {
      small_in_a_row = 0;
    }
  }
  if (!certified && !us.empty()) {
    // Probe a fixed sample of residual entries; stagnation with a residual
    // still above tolerance is reported, exact capture is not.
    const double scale = std::sqrt(std::max(norm2_est, 0.0));
    double worst = 0.0;
    const index_t si = std::max<index_t>(1, m / 8), sj = std::max<index_t>(1, n / 8);
    for (index_t i = 0; i < m; i += si)
      for (index_t j = 0; j < n; j += sj) worst = std::max(worst, std::abs(residual_at(i, j)));
    lr.converged = worst <= tol * std::max(scale, std::numeric_limits<double>::min());
  }
  const index_t r = static_cast<index_t>(us.size());
  lr.U = DenseMatrix(m, r);
  lr.V = DenseMatrix(n, r);
  for (index_t k = 0; k < r; ++k) {
    for (index_t i2 = 0; i2 < m; ++i2) lr.U(i2, k) = us[k][i2];
    for (index_t j2 = 0; j2 < n; ++j2) lr.V(j2, k) = vs[k][j2];
  }
  return lr;
}

inline LowRank aca(const DenseMatrix& M, double tol) {
  return aca([&](index_t i, index_t j) { return M(i, j); }, M.rows(), M.cols(), tol);
}

/// Randomized range finder from black-box products. `apply` maps an n x d
/// block X to M*X, `apply_t` an m x d block to M^T*X. One power iteration;
/// the rank cut happens on the projected matrix Q^T M, whose singular values
/// are M's captured ones. Deterministic for a fixed seed.
inline LowRank randomized_range(const std::function<DenseMatrix(const DenseMatrix&)>& apply,
                                const std::function<DenseMatrix(const DenseMatrix&)>& apply_t,
                                index_t m, index_t n, double tol, index_t oversample,
                                std::uint64_t seed) {
  const index_t d = std::min(std::max<index_t>(oversample, 1), std::min(m, n));
  DenseMatrix Omega(n, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : Omega.data()) v = gauss(rng);
  DenseMatrix Y = apply(Omega);
  Y = apply(apply_t(Y));  // one power iteration
  auto qr = detail::cpqr(std::move(Y), 0.0);
  LowRank lr;
  lr.tol = tol;
  if (qr.rank == 0) return lowrank_zero(m, n, tol);
  DenseMatrix B = apply_t(qr.Q);  // n x d, B^T = Q^T M
  LowRank core = truncated_svd(B, tol);
  lr.U = matmul(qr.Q, core.V);  // m x r
  lr.V = core.U;                // n x r carries the singular values
  return lr;
}

inline LowRank randomized_range(const DenseMatrix& M, double tol, index_t oversample,
                                std::uint64_t seed) {
  return randomized_range([&](const DenseMatrix& X) { return matmul(M, X); },
                          [&](const DenseMatrix& X) { return matmul(M.transposed(), X); },
                          M.rows(), M.cols(), tol, oversample, seed);
}

/// Row interpolative decomposition: M ~= interp * M(skeleton, :) with
/// interp(skeleton, :) = I. Selection by column-pivoted QR of M^T.
struct Skeleton {
  std::vector<index_t> skeleton_indices;
  DenseMatrix interp;  // m x r

  index_t rank() const { return static_cast<index_t>(skeleton_indices.size()); }
};

inline Skeleton interpolative_decomposition(const DenseMatrix& M, double tol) {
  const index_t m = M.rows();
  auto qr = detail::cpqr(M.transposed(), tol);
  const index_t r = qr.rank;
  Skeleton sk;
  sk.skeleton_indices.assign(qr.pivots.begin(), qr.pivots.begin() + r);
  sk.interp = DenseMatrix(m, r);
  if (r == 0) return sk;
  // interp rows solve M(row,:) = T * M(skeleton,:), i.e. R11^{-1} R12 per
  // dropped row; skeleton rows get identity coefficients.
  DenseMatrix R11(r, r), R12(r, m - r);
  for (index_t j = 0; j < r; ++j)
    for (index_t i = 0; i <= j; ++i) R11(i, j) = qr.R(i, j);
  for (index_t j = r; j < m; ++j)
    for (index_t i = 0; i < r; ++i) R12(i, j - r) = qr.R(i, j);
  DenseMatrix T = trsm(Side::left, Uplo::upper, Trans::no, Diag::non_unit, R11, R12);
  for (index_t k = 0; k < r; ++k) sk.interp(sk.skeleton_indices[k], k) = 1.0;
  for (index_t j = r; j < m; ++j) {
    const index_t row = qr.pivots[j];
    for (index_t k = 0; k < r; ++k) sk.interp(row, k) = T(k, j - r);
  }
  return sk;
}

/// QR-based recompression of a low-rank sum back to `tol`. Cancellation is
/// cut at an absolute floor relative to the addend magnitudes, so exactly
/// cancelling sums collapse to rank 0 instead of keeping roundoff.
inline void recompress(LowRank& lr, double tol) {
  if (lr.rank() == 0) return;
  auto qu = detail::cpqr(lr.U, 0.0, lr.rank());
  auto qv = detail::cpqr(lr.V, 0.0, lr.rank());
  DenseMatrix Ru(qu.rank, lr.rank()), Rv(qv.rank, lr.rank());
  for (index_t j = 0; j < lr.rank(); ++j) {
    for (index_t i = 0; i < qu.rank; ++i) Ru(i, qu.pivots[j]) = qu.R(i, j);
    for (index_t i = 0; i < qv.rank; ++i) Rv(i, qv.pivots[j]) = qv.R(i, j);
  }
  DenseMatrix prod = matmul(Ru, Rv.transposed());
  const double floor =
      20.0 * std::numeric_limits<double>::epsilon() * Ru.norm_fro() * Rv.norm_fro();
  DenseMatrix U, V;
  std::vector<double> sigma;
  const bool flip = prod.rows() < prod.cols();
  detail::jacobi_svd(flip ? prod.transposed() : prod, U, sigma, V);
  if (flip) std::swap(U, V);
  const double s1 = sigma.empty() ? 0.0 : sigma[0];
  index_t r = 0;
  while (r < static_cast<index_t>(sigma.size()) && sigma[r] > tol * s1 && sigma[r] > floor) ++r;
  DenseMatrix Uc(prod.rows(), r), Vc(prod.cols(), r);
  for (index_t j = 0; j < r; ++j) {
    for (index_t i = 0; i < prod.rows(); ++i) Uc(i, j) = U(i, j) * sigma[j];
    for (index_t i = 0; i < prod.cols(); ++i) Vc(i, j) = V(i, j);
  }
  lr.U = matmul(qu.Q, Uc);
  lr.V = matmul(qv.Q, Vc);
}

/// Append a second low-rank term: (U,V) <- [U X][V W], no recompression.
inline void lowrank_append(LowRank& lr, const DenseMatrix& X, const DenseMatrix& W) {
  const index_t r0 = lr.rank(), ra = X.cols();
  DenseMatrix U(lr.rows(), r0 + ra), V(lr.cols(), r0 + ra);
  U.set_block(0, 0, lr.U);
  U.set_block(0, r0, X);
  V.set_block(0, 0, lr.V);
  V.set_block(0, r0, W);
  lr.U = std::move(U);
  lr.V = std::move(V);
}

}  // namespace rsmf

#endif
