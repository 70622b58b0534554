#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rsmf/hodlr.hpp"

using namespace rsmf;

namespace {

std::vector<std::vector<double>> grid1d(index_t n, double lo = 0.0, double hi = 1.0) {
  std::vector<std::vector<double>> pts;
  for (index_t i = 0; i < n; ++i)
    pts.push_back({lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)});
  return pts;
}

// Gaussian kernel in clustered order with an optional diagonal shift.
std::function<double(index_t, index_t)> gaussian_entry(const ClusterTree& tree,
                                                       const std::vector<std::vector<double>>& pts,
                                                       double sigma, double shift = 0.0) {
  auto spec = std::make_shared<KernelSpec>(KernelSpec::gaussian(pts, sigma));
  auto perm = tree.perm;
  return [spec, perm, shift](index_t i, index_t j) {
    return kernel_entry(*spec, perm[i], perm[j]) + (i == j ? shift : 0.0);
  };
}

double rel_err(const DenseMatrix& A, const DenseMatrix& B) {
  DenseMatrix D = A;
  for (index_t j = 0; j < A.cols(); ++j)
    for (index_t i = 0; i < A.rows(); ++i) D(i, j) -= B(i, j);
  return D.norm_fro() / (A.norm_fro() == 0 ? 1.0 : A.norm_fro());
}

double rel_resid(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(den == 0 ? 1.0 : den);
}

}  // namespace

TEST_CASE("diagonal kernel compresses to rank-0 couplings") {
  auto tree = build_cluster_tree(static_cast<index_t>(64), 8);
  auto H = hodlr_compress([](index_t i, index_t j) { return i == j ? 2.0 : 0.0; }, tree, 1e-10);
  index_t leaf_scalars = 0;
  for (const auto& nd : H.nodes) {
    if (nd.child0 < 0)
      leaf_scalars += nd.diag.rows() * nd.diag.cols();
    else {
      CHECK(nd.b01.rank() == 0);
      CHECK(nd.b10.rank() == 0);
    }
  }
  CHECK(H.stored_scalars() == leaf_scalars);
}

TEST_CASE("rank-1 coupling at a single level") {
  const index_t leaf = 8;
  auto tree = build_cluster_tree(static_cast<index_t>(2 * leaf), leaf);
  auto H = hodlr_compress(
      [leaf](index_t i, index_t j) {
        if ((i < leaf) == (j < leaf)) return i == j ? 4.0 : 0.5;
        return 0.25;  // constant off-diagonal block: rank 1
      },
      tree, 1e-12);
  CHECK(H.nodes.size() == 3);
  CHECK(H.nodes[0].b01.rank() == 1);
  CHECK(H.nodes[0].b10.rank() == 1);
}

TEST_CASE("gaussian 512: matvec accuracy and storage win") {
  const index_t n = 512;
  auto pts = grid1d(n);
  auto tree = build_cluster_tree(pts, 32);
  auto H = hodlr_compress(gaussian_entry(tree, pts, 0.5), tree, 1e-8);
  CHECK(H.all_converged());
  // Dense reference in the same (clustered) order.
  DenseMatrix D(n, n);
  auto entry = gaussian_entry(tree, pts, 0.5);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < n; ++i) D(i, j) = entry(i, j);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  CHECK(rel_resid(H.matvec(x), matvec(D, x)) <= 1e-6);
  CHECK(H.stored_scalars() < static_cast<index_t>(0.35 * n * n));
  CHECK(rel_err(D, H.densify()) <= 10 * 1e-8);
}

TEST_CASE("matvec trivial cases and densify oracle") {
  auto tree = build_cluster_tree(static_cast<index_t>(48), 8);
  auto H = hodlr_compress([](index_t i, index_t j) { return i == j ? 1.0 : 0.0; }, tree, 1e-10);
  std::vector<double> x(48, 0.0);
  CHECK(H.matvec(x) == x);  // zero in, zero out
  for (index_t i = 0; i < 48; ++i) x[i] = 0.5 * i;
  CHECK(H.matvec(x) == x);  // identity-like H

  // random-ish H against its densification
  auto pts = grid1d(48);
  auto tree2 = build_cluster_tree(pts, 8);
  auto H2 = hodlr_compress(gaussian_entry(tree2, pts, 0.3), tree2, 1e-9);
  DenseMatrix D = H2.densify();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(48);
  for (auto& v : y) v = g(rng);
  CHECK(rel_resid(H2.matvec(y), matvec(D, y)) <= 1e-12);
}

TEST_CASE("hodlr storage bound") {
  const index_t n = 256;
  auto pts = grid1d(n);
  auto tree = build_cluster_tree(pts, 16);
  auto H = hodlr_compress(gaussian_entry(tree, pts, 0.4), tree, 1e-8);
  index_t bound = 2 * n * 16;
  for (const auto& nd : H.nodes)
    if (nd.child0 >= 0) bound += nd.b01.stored_scalars() + nd.b10.stored_scalars();
  CHECK(H.stored_scalars() <= bound);
}

TEST_CASE("factor of block-diagonal equals independent leaf solves") {
  const index_t leaf = 8, n = 4 * leaf;
  auto tree = build_cluster_tree(n, leaf);
  DenseMatrix blocks = random_matrix(n, n, 31);
  auto H = hodlr_compress(
      [&](index_t i, index_t j) {
        if (i / leaf != j / leaf) return 0.0;
        return blocks(i, j) + (i == j ? 6.0 : 0.0);
      },
      tree, 1e-12);
  HodlrSolver solver(H);
  std::vector<double> b(n);
  for (index_t i = 0; i < n; ++i) b[i] = 1.0 + 0.01 * i;
  auto x = solver.solve(b);
  for (index_t blk = 0; blk < 4; ++blk) {
    DenseMatrix Dk(leaf, leaf);
    for (index_t j = 0; j < leaf; ++j)
      for (index_t i = 0; i < leaf; ++i)
        Dk(i, j) = blocks(blk * leaf + i, blk * leaf + j) + (i == j ? 6.0 : 0.0);
    auto fk = lu_partial_pivot(Dk);
    std::vector<double> bk(b.begin() + blk * leaf, b.begin() + (blk + 1) * leaf);
    auto xk = lu_solve(fk, bk);
    for (index_t i = 0; i < leaf; ++i) CHECK(x[blk * leaf + i] == doctest::Approx(xk[i]));
  }
}

TEST_CASE("factor of shifted gaussian kernel solves to tolerance") {
  const index_t n = 256;
  auto pts = grid1d(n);
  auto tree = build_cluster_tree(pts, 16);
  const double tol = 1e-8;
  auto entry = gaussian_entry(tree, pts, 0.5, 1.0);
  auto H = hodlr_compress(entry, tree, tol);
  HodlrSolver solver(H);
  std::vector<double> b(n, 1.0);
  auto x = solver.solve(b);
  // residual against the exact (uncompressed) operator
  DenseMatrix D(n, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < n; ++i) D(i, j) = entry(i, j);
  auto Hx = matvec(D, x);
  CHECK(rel_resid(Hx, b) <= 1e-6);
}

TEST_CASE("factor matches dense LU on compressed random SPD") {
  const index_t n = 96;
  DenseMatrix G = random_matrix(n, n, 77);
  DenseMatrix S = gemm(1.0, G, G.transposed(), 0.0, DenseMatrix());
  for (index_t i = 0; i < n; ++i) S(i, i) += static_cast<double>(n);
  auto tree = build_cluster_tree(n, 12);
  const double tol = 1e-9;
  auto H = hodlr_compress([&](index_t i, index_t j) { return S(i, j); }, tree, tol);
  HodlrSolver solver(H);
  std::vector<double> b(n);
  for (index_t i = 0; i < n; ++i) b[i] = std::sin(0.1 * i);
  auto x = solver.solve(b);
  auto xd = lu_solve(lu_partial_pivot(S), b);
  CHECK(rel_resid(x, xd) <= 1e-6);
}

TEST_CASE("factor-then-solve left inverse within 50 tol") {
  const index_t n = 192;
  auto pts = grid1d(n);
  auto tree = build_cluster_tree(pts, 16);
  for (double tol : {1e-6, 1e-8}) {
    auto entry = gaussian_entry(tree, pts, 0.6, 2.0);
    auto H = hodlr_compress(entry, tree, tol);
    DenseMatrix D(n, n);
    for (index_t j = 0; j < n; ++j)
      for (index_t i = 0; i < n; ++i) D(i, j) = entry(i, j);
    HodlrSolver solver(H);
    std::vector<double> b(n, 1.0);
    auto x = solver.solve(b);
    CHECK(rel_resid(matvec(D, x), b) <= 50 * tol);
  }
}

TEST_CASE("matvec-sourced compression matches entry compression") {
  const index_t n = 128;
  auto pts = grid1d(n);
  auto tree = build_cluster_tree(pts, 16);
  auto entry = gaussian_entry(tree, pts, 0.5);
  DenseMatrix D(n, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < n; ++i) D(i, j) = entry(i, j);
  auto H = hodlr_compress_matvec([&](const std::vector<double>& x) { return matvec(D, x); },
                                 [&](const std::vector<double>& x) { return matvec_t(D, x); },
                                 tree, 1e-8, 24, 3);
  CHECK(rel_err(D, H.densify()) <= 1e-5);
}

TEST_CASE("laplace3d kernel densify-compress round trip") {
  const index_t n = 256;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (index_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), u(rng)});
  auto tree = build_cluster_tree(pts, 16);
  auto spec = std::make_shared<KernelSpec>(KernelSpec::laplace3d(pts));
  auto perm = tree.perm;
  auto entry = [spec, perm](index_t i, index_t j) {
    return kernel_entry(*spec, perm[i], perm[j]);
  };
  const double tol = 1e-6;
  auto H = hodlr_compress(entry, tree, tol);
  DenseMatrix D(n, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < n; ++i) D(i, j) = entry(i, j);
  CHECK(rel_err(D, H.densify()) <= 10 * tol);
}

TEST_CASE("singular leaf is reported with its node") {
  auto tree = build_cluster_tree(static_cast<index_t>(16), 4);
  auto H = hodlr_compress([](index_t, index_t) { return 0.0; }, tree, 1e-8);
  CHECK_THROWS_AS(HodlrSolver{H}, singular_error);
}

TEST_CASE("rank table csv shape") {
  auto tree = build_cluster_tree(static_cast<index_t>(32), 8);
  auto H = hodlr_compress([](index_t i, index_t j) { return 1.0 / (1.0 + std::abs(i - j)); },
                          tree, 1e-6);
  auto csv = H.rank_table_csv();
  CHECK(csv.rfind("level,block_row,block_col,rank,rows,cols\n", 0) == 0);
  // one pair of lines per internal node
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  index_t internals = 0;
  for (const auto& nd : H.nodes)
    if (nd.child0 >= 0) ++internals;
  CHECK(lines == static_cast<std::size_t>(1 + 2 * internals));
}
