#ifndef RSMF_HODLR_HPP
#define RSMF_HODLR_HPP

#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "rsmf/cluster.hpp"
#include "rsmf/lowrank.hpp"

namespace rsmf {

/// Hierarchically off-diagonal low-rank matrix: every sibling off-diagonal
/// block at every level is one LowRank factor, leaf diagonal blocks dense.
/// Indices live in the cluster-tree (clustered) order; callers with a
/// geometric tree compose tree.perm outside.
struct HodlrMatrix {
  struct Node {
    index_t begin = 0, end = 0;
    index_t child0 = -1, child1 = -1;
    int level = 0;
    DenseMatrix diag;   // leaves
    LowRank b01, b10;   // internal: (rows of child0 x cols of child1) and transpose block

    index_t size() const { return end - begin; }
  };
  std::vector<Node> nodes;
  index_t n = 0;
  double tol = 0.0;

  bool is_leaf(index_t id) const { return nodes[id].child0 < 0; }

  bool all_converged() const {
    for (const auto& nd : nodes)
      if (nd.child0 >= 0 && (!nd.b01.converged || !nd.b10.converged)) return false;
    return true;
  }

  index_t stored_scalars() const {
    index_t total = 0;
    for (const auto& nd : nodes) {
      if (nd.child0 < 0)
        total += nd.diag.rows() * nd.diag.cols();
      else
        total += nd.b01.stored_scalars() + nd.b10.stored_scalars();
    }
    return total;
  }

  index_t max_offdiag_rank() const {
    index_t r = 0;
    for (const auto& nd : nodes)
      if (nd.child0 >= 0) r = std::max({r, nd.b01.rank(), nd.b10.rank()});
    return r;
  }

  std::vector<double> matvec(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (const auto& nd : nodes) {
      if (nd.child0 < 0) {
        for (index_t j = 0; j < nd.diag.cols(); ++j) {
          const double xj = x[nd.begin + j];
          if (xj == 0.0) continue;
          for (index_t i = 0; i < nd.diag.rows(); ++i) y[nd.begin + i] += nd.diag(i, j) * xj;
        }
      } else {
        const auto& c0 = nodes[nd.child0];
        const auto& c1 = nodes[nd.child1];
        auto slice = [&](index_t b, index_t e) {
          return std::vector<double>(x.begin() + b, x.begin() + e);
        };
        auto y01 = nd.b01.apply(slice(c1.begin, c1.end));
        for (index_t i = 0; i < c0.end - c0.begin; ++i) y[c0.begin + i] += y01[i];
        auto y10 = nd.b10.apply(slice(c0.begin, c0.end));
        for (index_t i = 0; i < c1.end - c1.begin; ++i) y[c1.begin + i] += y10[i];
      }
    }
    return y;
  }

  DenseMatrix densify() const {
    DenseMatrix D(n, n);
    for (const auto& nd : nodes) {
      if (nd.child0 < 0) {
        D.set_block(nd.begin, nd.begin, nd.diag);
      } else {
        const auto& c0 = nodes[nd.child0];
        const auto& c1 = nodes[nd.child1];
        D.set_block(c0.begin, c1.begin, nd.b01.densify());
        D.set_block(c1.begin, c0.begin, nd.b10.densify());
      }
    }
    return D;
  }

  /// Per-level rank table: level,block_row,block_col,rank,rows,cols
  std::string rank_table_csv() const {
    std::ostringstream os;
    os << "level,block_row,block_col,rank,rows,cols\n";
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      const auto& nd = nodes[id];
      if (nd.child0 < 0) continue;
      const auto& c0 = nodes[nd.child0];
      const auto& c1 = nodes[nd.child1];
      os << nd.level << "," << nd.child0 << "," << nd.child1 << "," << nd.b01.rank() << ","
         << c0.size() << "," << c1.size() << "\n";
      os << nd.level << "," << nd.child1 << "," << nd.child0 << "," << nd.b10.rank() << ","
         << c1.size() << "," << c0.size() << "\n";
    }
    return os.str();
  }
};

namespace detail {

inline index_t hodlr_copy_tree(HodlrMatrix& H, const ClusterTree& tree, index_t src) {
  const index_t id = static_cast<index_t>(H.nodes.size());
  H.nodes.emplace_back();
  H.nodes[id].begin = tree.nodes[src].begin;
  H.nodes[id].end = tree.nodes[src].end;
  H.nodes[id].level = tree.nodes[src].level;
  if (!tree.is_leaf(src)) {
    const index_t c0 = hodlr_copy_tree(H, tree, tree.nodes[src].child0);
    const index_t c1 = hodlr_copy_tree(H, tree, tree.nodes[src].child1);
    H.nodes[id].child0 = c0;
    H.nodes[id].child1 = c1;
  }
  return id;
}

}  // namespace detail

/// Entry-evaluation construction: off-diagonal sibling blocks compressed by
/// ACA, leaf diagonals assembled densely. `entry` is indexed in clustered
/// order.
inline HodlrMatrix hodlr_compress(const std::function<double(index_t, index_t)>& entry,
                                  const ClusterTree& tree, double tol) {
  HodlrMatrix H;
  H.n = tree.n();
  H.tol = tol;
  if (H.n == 0) return H;
  detail::hodlr_copy_tree(H, tree, 0);
  for (auto& nd : H.nodes) {
    if (nd.child0 < 0) {
      nd.diag = DenseMatrix(nd.end - nd.begin, nd.end - nd.begin);
      for (index_t j = 0; j < nd.diag.cols(); ++j)
        for (index_t i = 0; i < nd.diag.rows(); ++i)
          nd.diag(i, j) = entry(nd.begin + i, nd.begin + j);
    } else {
      const auto& c0 = H.nodes[nd.child0];
      const auto& c1 = H.nodes[nd.child1];
      nd.b01 = aca([&](index_t i, index_t j) { return entry(c0.begin + i, c1.begin + j); },
                   c0.size(), c1.size(), tol);
      nd.b10 = aca([&](index_t i, index_t j) { return entry(c1.begin + i, c0.begin + j); },
                   c1.size(), c0.size(), tol);
    }
  }
  return H;
}

/// Matvec-source construction: each off-diagonal block is compressed by the
/// randomized range finder, probing the block through the global products
/// y = A x and y = A^T x (restricted and embedded per block). Leaf diagonals
/// are recovered by applying A to embedded identity columns.
inline HodlrMatrix hodlr_compress_matvec(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    const std::function<std::vector<double>(const std::vector<double>&)>& apply_t,
    const ClusterTree& tree, double tol, index_t oversample, std::uint64_t seed) {
  HodlrMatrix H;
  H.n = tree.n();
  H.tol = tol;
  if (H.n == 0) return H;
  detail::hodlr_copy_tree(H, tree, 0);
  const index_t n = H.n;
  auto block_apply = [&](const std::function<std::vector<double>(const std::vector<double>&)>& op,
                         index_t rb, index_t re, index_t cb, index_t ce, const DenseMatrix& X) {
    DenseMatrix Y(re - rb, X.cols());
    std::vector<double> full(static_cast<std::size_t>(n), 0.0);
    for (index_t c = 0; c < X.cols(); ++c) {
      std::fill(full.begin(), full.end(), 0.0);
      for (index_t i = 0; i < ce - cb; ++i) full[cb + i] = X(i, c);
      auto out = op(full);
      for (index_t i = 0; i < re - rb; ++i) Y(i, c) = out[rb + i];
    }
    return Y;
  };
  std::uint64_t block_seed = seed;
  for (auto& nd : H.nodes) {
    if (nd.child0 < 0) {
      DenseMatrix I = DenseMatrix::identity(nd.size());
      nd.diag = block_apply(apply, nd.begin, nd.end, nd.begin, nd.end, I);
    } else {
      const auto& c0 = H.nodes[nd.child0];
      const auto& c1 = H.nodes[nd.child1];
      // Restricting the global matvec zeroes every other block's
      // contribution, so the probe sees exactly this block.
      nd.b01 = randomized_range(
          [&](const DenseMatrix& X) {
            return block_apply(apply, c0.begin, c0.end, c1.begin, c1.end, X);
          },
          [&](const DenseMatrix& X) {
            return block_apply(apply_t, c1.begin, c1.end, c0.begin, c0.end, X);
          },
          c0.size(), c1.size(), tol, oversample, block_seed++);
      nd.b10 = randomized_range(
          [&](const DenseMatrix& X) {
            return block_apply(apply, c1.begin, c1.end, c0.begin, c0.end, X);
          },
          [&](const DenseMatrix& X) {
            return block_apply(apply_t, c0.begin, c0.end, c1.begin, c1.end, X);
          },
          c1.size(), c0.size(), tol, oversample, block_seed++);
    }
  }
  return H;
}

inline std::vector<double> hodlr_matvec(const HodlrMatrix& H, const std::vector<double>& x) {
  return H.matvec(x);
}

/// Factorization of a HODLR matrix by recursive 2x2 block LU: factor the
/// leading block, solve it against the couplings, fold the low-rank Schur
/// correction into the trailing child, recurse. Solve cost O(sum r n log n).
class HodlrSolver {
public:
  explicit HodlrSolver(HodlrMatrix H, index_t recompress_cap = 0)
      : H_(std::move(H)), recompress_cap_(recompress_cap) {
    if (H_.n > 0) factor_node(0);
  }

  const HodlrMatrix& factor() const { return H_; }

  std::vector<double> solve(const std::vector<double>& b) const {
    DenseMatrix B(H_.n, 1);
    for (index_t i = 0; i < H_.n; ++i) B(i, 0) = b[i];
    DenseMatrix X = solve_node(0, B);
    std::vector<double> x(static_cast<std::size_t>(H_.n));
    for (index_t i = 0; i < H_.n; ++i) x[i] = X(i, 0);
    return x;
  }

  DenseMatrix solve(const DenseMatrix& B) const { return solve_node(0, B); }

private:
  HodlrMatrix H_;
  std::vector<DenseLu> leaf_lu_;
  std::vector<index_t> leaf_lu_id_;  // per node, -1 for internals
  index_t recompress_cap_ = 0;

  void fold(index_t id, const DenseMatrix& X, const DenseMatrix& W) {
    auto& nd = H_.nodes[id];
    if (nd.child0 < 0) {
      nd.diag = gemm(1.0, X, W.transposed(), 1.0, nd.diag);
      return;
    }
    const index_t n0 = H_.nodes[nd.child0].size();
    DenseMatrix X0 = X.block(0, 0, n0, X.cols());
    DenseMatrix X1 = X.block(n0, 0, X.rows() - n0, X.cols());
    DenseMatrix W0 = W.block(0, 0, n0, W.cols());
    DenseMatrix W1 = W.block(n0, 0, W.rows() - n0, W.cols());
    append_with_recompress(nd.b01, X0, W1);
    append_with_recompress(nd.b10, X1, W0);
    fold(nd.child0, X0, W0);
    fold(nd.child1, X1, W1);
  }

  void append_with_recompress(LowRank& lr, const DenseMatrix& X, const DenseMatrix& W) {
    if (X.cols() == 0) return;
    const index_t max_addend = std::max(lr.rank(), X.cols());
    lowrank_append(lr, X, W);
    if (lr.rank() > 2 * max_addend || lr.rank() > std::min(lr.rows(), lr.cols()))
      recompress(lr, H_.tol);
  }

  void factor_node(index_t id) {
    auto& nd = H_.nodes[id];
    if (leaf_lu_id_.empty()) leaf_lu_id_.assign(H_.nodes.size(), -1);
    if (nd.child0 < 0) {
      try {
        leaf_lu_id_[id] = static_cast<index_t>(leaf_lu_.size());
        leaf_lu_.push_back(lu_partial_pivot(nd.diag));
      } catch (const singular_error&) {
        throw singular_error("hodlr_factor: singular leaf diagonal block at node", id);
      }
      nd.diag = DenseMatrix();  // factored copy lives in leaf_lu_
      return;
    }
    factor_node(nd.child0);
    // Schur correction: F11 <- F11 - U10 (V10^T F00^{-1} U01) V01^T.
    auto& ndr = H_.nodes[id];
    if (ndr.b01.rank() > 0 && ndr.b10.rank() > 0) {
      DenseMatrix Y = solve_node(ndr.child0, ndr.b01.U);
      DenseMatrix C = matmul(ndr.b10.V.transposed(), Y);
      DenseMatrix X = gemm(-1.0, ndr.b10.U, C, 0.0, DenseMatrix());
      fold(ndr.child1, X, ndr.b01.V);
    }
    factor_node(H_.nodes[id].child1);
  }

  DenseMatrix solve_node(index_t id, const DenseMatrix& B) const {
    const auto& nd = H_.nodes[id];
    if (nd.child0 < 0) return lu_upper_solve(leaf_lu_[leaf_lu_id_[id]],
                                             lu_lower_solve(leaf_lu_[leaf_lu_id_[id]], B));
    const auto& c0 = H_.nodes[nd.child0];
    const index_t n0 = c0.size();
    DenseMatrix B0 = B.block(0, 0, n0, B.cols());
    DenseMatrix B1 = B.block(n0, 0, B.rows() - n0, B.cols());
    DenseMatrix Z0 = solve_node(nd.child0, B0);
    DenseMatrix R1 = B1;
    if (nd.b10.rank() > 0)
      R1 = gemm(-1.0, nd.b10.U, matmul(nd.b10.V.transposed(), Z0), 1.0, B1);
    DenseMatrix X1 = solve_node(nd.child1, R1);
    DenseMatrix R0 = B0;
    if (nd.b01.rank() > 0)
      R0 = gemm(-1.0, nd.b01.U, matmul(nd.b01.V.transposed(), X1), 1.0, B0);
    DenseMatrix X0 = solve_node(nd.child0, R0);
    DenseMatrix X(B.rows(), B.cols());
    X.set_block(0, 0, X0);
    X.set_block(n0, 0, X1);
    return X;
  }
};

inline HodlrSolver hodlr_factor(HodlrMatrix H) { return HodlrSolver(std::move(H)); }

}  // namespace rsmf

#endif
