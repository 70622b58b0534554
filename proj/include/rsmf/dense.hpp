#ifndef RSMF_DENSE_HPP
#define RSMF_DENSE_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>
#include <utility>
#include <vector>

#include "rsmf/core.hpp"

namespace rsmf {

/// Column-major dense matrix of doubles.
class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(index_t rows, index_t cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), 0.0) {}

  static DenseMatrix identity(index_t n) {
    DenseMatrix I(n, n);
    for (index_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  index_t rows() const { return rows_; }
  index_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(index_t i, index_t j) { return data_[static_cast<std::size_t>(j * rows_ + i)]; }
  double operator()(index_t i, index_t j) const { return data_[static_cast<std::size_t>(j * rows_ + i)]; }

  double* col(index_t j) { return data_.data() + j * rows_; }
  const double* col(index_t j) const { return data_.data() + j * rows_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  DenseMatrix transposed() const {
    DenseMatrix T(cols_, rows_);
    for (index_t j = 0; j < cols_; ++j)
      for (index_t i = 0; i < rows_; ++i) T(j, i) = (*this)(i, j);
    return T;
  }

  DenseMatrix block(index_t i0, index_t j0, index_t m, index_t n) const {
    DenseMatrix B(m, n);
    for (index_t j = 0; j < n; ++j)
      for (index_t i = 0; i < m; ++i) B(i, j) = (*this)(i0 + i, j0 + j);
    return B;
  }

  void set_block(index_t i0, index_t j0, const DenseMatrix& B) {
    for (index_t j = 0; j < B.cols(); ++j)
      for (index_t i = 0; i < B.rows(); ++i) (*this)(i0 + i, j0 + j) = B(i, j);
  }

  double norm_fro() const {
    double s = 0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  double norm_max() const {
    double s = 0;
    for (double v : data_) s = std::max(s, std::abs(v));
    return s;
  }

private:
  index_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline double norm2(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

/// alpha*A*B + beta*C with a fixed j-k-i loop nest: the summation order is
/// part of the contract (bitwise deterministic).
inline DenseMatrix gemm(double alpha, const DenseMatrix& A, const DenseMatrix& B, double beta,
                        const DenseMatrix& C) {
  if (A.cols() != B.rows()) throw structural_error("gemm: inner dimensions do not match");
  if (!C.empty() && (C.rows() != A.rows() || C.cols() != B.cols()))
    throw structural_error("gemm: C dimensions do not match");
  DenseMatrix R(A.rows(), B.cols());
  if (beta != 0.0 && !C.empty())
    for (index_t j = 0; j < R.cols(); ++j)
      for (index_t i = 0; i < R.rows(); ++i) R(i, j) = beta * C(i, j);
  if (alpha != 0.0)
    for (index_t j = 0; j < B.cols(); ++j)
      for (index_t k = 0; k < A.cols(); ++k) {
        const double b = alpha * B(k, j);
        if (b == 0.0) continue;
        const double* ak = A.col(k);
        double* rj = R.col(j);
        for (index_t i = 0; i < A.rows(); ++i) rj[i] += ak[i] * b;
      }
  return R;
}

inline DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  return gemm(1.0, A, B, 0.0, DenseMatrix());
}

inline std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x) {
  std::vector<double> y(A.rows(), 0.0);
  for (index_t j = 0; j < A.cols(); ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    const double* aj = A.col(j);
    for (index_t i = 0; i < A.rows(); ++i) y[i] += aj[i] * xj;
  }
  return y;
}

inline std::vector<double> matvec_t(const DenseMatrix& A, const std::vector<double>& x) {
  std::vector<double> y(A.cols(), 0.0);
  for (index_t j = 0; j < A.cols(); ++j) {
    const double* aj = A.col(j);
    double s = 0;
    for (index_t i = 0; i < A.rows(); ++i) s += aj[i] * x[i];
    y[j] = s;
  }
  return y;
}

enum class Side { left, right };
enum class Uplo { lower, upper };
enum class Trans { no, yes };
enum class Diag { non_unit, unit };

/// Triangular solve: returns X with
///   side=left :  op(T) * X = B
///   side=right:  X * op(T) = B
inline DenseMatrix trsm(Side side, Uplo uplo, Trans trans, Diag diag, const DenseMatrix& T,
                        const DenseMatrix& B) {
  if (T.rows() != T.cols()) throw structural_error("trsm: T not square");
  const index_t n = T.rows();
  if (diag == Diag::non_unit)
    for (index_t k = 0; k < n; ++k)
      if (T(k, k) == 0.0) throw singular_error("trsm: zero diagonal", k);

  // Solving with op(T) on the left; the right-side case transposes around it.
  if (side == Side::right)
    return trsm(Side::left, uplo, trans == Trans::no ? Trans::yes : Trans::no, diag, T,
                B.transposed())
        .transposed();

  if (B.rows() != n) throw structural_error("trsm: B rows do not match T");
  DenseMatrix X = B;
  const bool lower_solve = (uplo == Uplo::lower) == (trans == Trans::no);
  auto t = [&](index_t i, index_t j) { return trans == Trans::no ? T(i, j) : T(j, i); };
  for (index_t c = 0; c < X.cols(); ++c) {
    double* x = X.col(c);
    if (lower_solve) {
      for (index_t i = 0; i < n; ++i) {
        double s = x[i];
        for (index_t j = 0; j < i; ++j) s -= t(i, j) * x[j];
        x[i] = diag == Diag::unit ? s : s / t(i, i);
      }
    } else {
      for (index_t i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (index_t j = i + 1; j < n; ++j) s -= t(i, j) * x[j];
        x[i] = diag == Diag::unit ? s : s / t(i, i);
      }
    }
  }
  return X;
}

/// Packed LU with partial pivoting, P*M = L*U. `lu` holds L (unit, strictly
/// below the diagonal) and U; `piv` is the row permutation as swap targets.
struct DenseLu {
  DenseMatrix lu;
  std::vector<index_t> piv;

  index_t n() const { return lu.rows(); }

  /// Row permutation in one-line form: perm[i] = source row of pivoted row i.
  std::vector<index_t> perm() const {
    std::vector<index_t> p(static_cast<std::size_t>(n()));
    for (index_t i = 0; i < n(); ++i) p[i] = i;
    for (index_t k = 0; k < n(); ++k) std::swap(p[k], p[piv[k]]);
    return p;
  }
};

inline DenseLu lu_partial_pivot(DenseMatrix M) {
  if (M.rows() != M.cols()) throw structural_error("lu: matrix not square");
  const index_t n = M.rows();
  std::vector<index_t> piv(static_cast<std::size_t>(n));
  for (index_t k = 0; k < n; ++k) {
    index_t p = k;
    double best = std::abs(M(k, k));
    for (index_t i = k + 1; i < n; ++i)
      if (std::abs(M(i, k)) > best) {
        best = std::abs(M(i, k));
        p = i;
      }
    if (best == 0.0) throw singular_error("lu: zero pivot column", k);
    piv[k] = p;
    if (p != k)
      for (index_t j = 0; j < n; ++j) std::swap(M(k, j), M(p, j));
    const double ukk = M(k, k);
    for (index_t i = k + 1; i < n; ++i) M(i, k) /= ukk;
    for (index_t j = k + 1; j < n; ++j) {
      const double ukj = M(k, j);
      if (ukj == 0.0) continue;
      double* mj = M.col(j);
      const double* mk = M.col(k);
      for (index_t i = k + 1; i < n; ++i) mj[i] -= mk[i] * ukj;
    }
  }
  return DenseLu{std::move(M), std::move(piv)};
}

/// Expands a packed factorization into (p, L, U) with P*M = L*U and
/// p in one-line form.
inline std::tuple<std::vector<index_t>, DenseMatrix, DenseMatrix> lu_unpack(const DenseLu& f) {
  const index_t n = f.n();
  DenseMatrix L = DenseMatrix::identity(n), U(n, n);
  for (index_t j = 0; j < n; ++j) {
    for (index_t i = j + 1; i < n; ++i) L(i, j) = f.lu(i, j);
    for (index_t i = 0; i <= j; ++i) U(i, j) = f.lu(i, j);
  }
  return {f.perm(), std::move(L), std::move(U)};
}

inline void lu_apply_pivots(const DenseLu& f, DenseMatrix& B) {
  for (index_t k = 0; k < f.n(); ++k)
    if (f.piv[k] != k)
      for (index_t j = 0; j < B.cols(); ++j) std::swap(B(k, j), B(f.piv[k], j));
}

/// B <- L^{-1} * P * B
inline DenseMatrix lu_lower_solve(const DenseLu& f, DenseMatrix B) {
  lu_apply_pivots(f, B);
  return trsm(Side::left, Uplo::lower, Trans::no, Diag::unit, f.lu, B);
}

/// B <- U^{-1} * B
inline DenseMatrix lu_upper_solve(const DenseLu& f, const DenseMatrix& B) {
  return trsm(Side::left, Uplo::upper, Trans::no, Diag::non_unit, f.lu, B);
}

/// B <- B * U^{-1}
inline DenseMatrix lu_right_upper_solve(const DenseLu& f, const DenseMatrix& B) {
  return trsm(Side::right, Uplo::upper, Trans::no, Diag::non_unit, f.lu, B);
}

inline std::vector<double> lu_solve(const DenseLu& f, std::vector<double> b) {
  DenseMatrix B(f.n(), 1);
  for (index_t i = 0; i < f.n(); ++i) B(i, 0) = b[i];
  B = lu_upper_solve(f, lu_lower_solve(f, std::move(B)));
  for (index_t i = 0; i < f.n(); ++i) b[i] = B(i, 0);
  return b;
}

/// Fills M with iid entries from U[-1, 1); the tests' standard random block.
inline DenseMatrix random_matrix(index_t rows, index_t cols, std::uint64_t seed) {
  DenseMatrix M(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : M.data()) v = dist(rng);
  return M;
}

}  // namespace rsmf

#endif
