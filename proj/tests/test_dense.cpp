#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rsmf/dense.hpp"

using namespace rsmf;

namespace {

DenseMatrix reconstruct_pma(const DenseLu& f, const DenseMatrix& M) {
  auto [p, L, U] = lu_unpack(f);
  DenseMatrix PM(M.rows(), M.cols());
  for (index_t i = 0; i < M.rows(); ++i)
    for (index_t j = 0; j < M.cols(); ++j) PM(i, j) = M(p[i], j);
  DenseMatrix LU = matmul(L, U);
  DenseMatrix D(M.rows(), M.cols());
  for (index_t i = 0; i < M.rows(); ++i)
    for (index_t j = 0; j < M.cols(); ++j) D(i, j) = PM(i, j) - LU(i, j);
  return D;
}

// Independent gemm oracle: plain index-triple loop.
DenseMatrix gemm_oracle(double alpha, const DenseMatrix& A, const DenseMatrix& B, double beta,
                        const DenseMatrix& C) {
  DenseMatrix R(A.rows(), B.cols());
  for (index_t i = 0; i < A.rows(); ++i)
    for (index_t j = 0; j < B.cols(); ++j) {
      double s = 0;
      for (index_t k = 0; k < A.cols(); ++k) s += A(i, k) * B(k, j);
      R(i, j) = alpha * s + (C.empty() ? 0.0 : beta * C(i, j));
    }
  return R;
}

}  // namespace

TEST_CASE("lu of identity") {
  auto f = lu_partial_pivot(DenseMatrix::identity(3));
  auto [p, L, U] = lu_unpack(f);
  for (index_t i = 0; i < 3; ++i) {
    CHECK(p[i] == i);
    for (index_t j = 0; j < 3; ++j) {
      CHECK(L(i, j) == (i == j ? 1.0 : 0.0));
      CHECK(U(i, j) == (i == j ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("lu forced pivot") {
  DenseMatrix M(2, 2);
  M(0, 1) = 1.0;
  M(1, 0) = 1.0;
  auto f = lu_partial_pivot(M);
  auto [p, L, U] = lu_unpack(f);
  CHECK(p[0] == 1);
  CHECK(p[1] == 0);
  CHECK(L(1, 0) == 0.0);
  CHECK(U(0, 0) == 1.0);
  CHECK(U(1, 1) == 1.0);
  CHECK(U(0, 1) == 0.0);
}

TEST_CASE("lu random 8x8 reconstruction") {
  DenseMatrix M = random_matrix(8, 8, 42);
  auto f = lu_partial_pivot(M);
  CHECK(reconstruct_pma(f, M).norm_max() <= 1e-13);
  // |L| <= 1 under partial pivoting.
  auto [p, L, U] = lu_unpack(f);
  (void)p;
  (void)U;
  CHECK(L.norm_max() <= 1.0 + 1e-15);
}

TEST_CASE("lu reconstruction bound across sizes") {
  for (index_t n : {1, 2, 3, 5, 9, 17, 33, 64}) {
    DenseMatrix M = random_matrix(n, n, 1000 + static_cast<std::uint64_t>(n));
    auto f = lu_partial_pivot(M);
    CHECK(reconstruct_pma(f, M).norm_max() <=
          static_cast<double>(n) * static_cast<double>(n) * 1e-14 * M.norm_max());
  }
}

TEST_CASE("lu zero pivot column reports index") {
  DenseMatrix Z(2, 2);
  Z(0, 0) = 1.0;  // column 1 identically zero
  CHECK_THROWS_AS(lu_partial_pivot(Z), singular_error);
  try {
    lu_partial_pivot(Z);
  } catch (const singular_error& e) {
    CHECK(e.where() == 1);
  }
}

TEST_CASE("lu solve matches known solution") {
  DenseMatrix M = random_matrix(12, 12, 7);
  for (index_t i = 0; i < 12; ++i) M(i, i) += 4.0;
  std::vector<double> xt(12, 1.0);
  std::vector<double> b = matvec(M, xt);
  auto f = lu_partial_pivot(M);
  auto x = lu_solve(f, b);
  for (auto v : x) CHECK(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("trsm identity and diagonal") {
  DenseMatrix B = random_matrix(4, 3, 5);
  DenseMatrix X = trsm(Side::left, Uplo::lower, Trans::no, Diag::non_unit,
                       DenseMatrix::identity(4), B);
  for (index_t j = 0; j < 3; ++j)
    for (index_t i = 0; i < 4; ++i) CHECK(X(i, j) == B(i, j));
  DenseMatrix T(1, 1), b1(1, 1);
  T(0, 0) = 2.0;
  b1(0, 0) = 4.0;
  CHECK(trsm(Side::left, Uplo::lower, Trans::no, Diag::non_unit, T, b1)(0, 0) == 2.0);
}

TEST_CASE("trsm residual, all variants") {
  DenseMatrix T = random_matrix(6, 6, 11);
  for (index_t i = 0; i < 6; ++i) {
    T(i, i) += 3.0;
    for (index_t j = i + 1; j < 6; ++j) T(i, j) = 0.0;  // lower triangular
  }
  DenseMatrix B = random_matrix(6, 2, 13);
  DenseMatrix X = trsm(Side::left, Uplo::lower, Trans::no, Diag::non_unit, T, B);
  DenseMatrix R = gemm(1.0, T, X, 0.0, DenseMatrix());
  double err = 0;
  for (index_t j = 0; j < 2; ++j)
    for (index_t i = 0; i < 6; ++i) err = std::max(err, std::abs(R(i, j) - B(i, j)));
  CHECK(err / B.norm_max() <= 1e-12);

  // right side: X * T = B
  DenseMatrix B2 = random_matrix(2, 6, 17);
  DenseMatrix X2 = trsm(Side::right, Uplo::lower, Trans::no, Diag::non_unit, T, B2);
  DenseMatrix R2 = matmul(X2, T);
  for (index_t j = 0; j < 6; ++j)
    for (index_t i = 0; i < 2; ++i) CHECK(std::abs(R2(i, j) - B2(i, j)) <= 1e-12);

  // transposed: T^T X = B
  DenseMatrix X3 = trsm(Side::left, Uplo::lower, Trans::yes, Diag::non_unit, T, B);
  DenseMatrix R3 = matmul(T.transposed(), X3);
  for (index_t j = 0; j < 2; ++j)
    for (index_t i = 0; i < 6; ++i) CHECK(std::abs(R3(i, j) - B(i, j)) <= 1e-12);
}

TEST_CASE("trsm zero diagonal") {
  DenseMatrix T(2, 2);
  T(0, 0) = 1.0;
  CHECK_THROWS_AS(trsm(Side::left, Uplo::lower, Trans::no, Diag::non_unit, T, DenseMatrix(2, 1)),
                  singular_error);
}

TEST_CASE("gemm basics") {
  DenseMatrix B = random_matrix(3, 4, 2);
  DenseMatrix R = gemm(1.0, DenseMatrix::identity(3), B, 0.0, DenseMatrix());
  for (index_t j = 0; j < 4; ++j)
    for (index_t i = 0; i < 3; ++i) CHECK(R(i, j) == B(i, j));
  DenseMatrix C = random_matrix(3, 4, 3);
  DenseMatrix R2 = gemm(0.0, DenseMatrix::identity(3), B, 1.0, C);
  for (index_t j = 0; j < 4; ++j)
    for (index_t i = 0; i < 3; ++i) CHECK(R2(i, j) == C(i, j));
}

TEST_CASE("gemm matches triple-loop oracle") {
  DenseMatrix A = random_matrix(3, 3, 21), B = random_matrix(3, 3, 22), C = random_matrix(3, 3, 23);
  DenseMatrix R = gemm(1.7, A, B, -0.3, C);
  DenseMatrix O = gemm_oracle(1.7, A, B, -0.3, C);
  for (index_t j = 0; j < 3; ++j)
    for (index_t i = 0; i < 3; ++i) CHECK(std::abs(R(i, j) - O(i, j)) <= 1e-14);
}

TEST_CASE("gemm dimension mismatch") {
  CHECK_THROWS_AS(gemm(1.0, DenseMatrix(2, 3), DenseMatrix(2, 2), 0.0, DenseMatrix()),
                  structural_error);
}

TEST_CASE("gemm determinism") {
  DenseMatrix A = random_matrix(17, 19, 31), B = random_matrix(19, 11, 32);
  DenseMatrix R1 = matmul(A, B), R2 = matmul(A, B);
  CHECK(R1.data() == R2.data());
}
