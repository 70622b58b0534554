#ifndef RSMF_MULTIFRONTAL_HPP
#define RSMF_MULTIFRONTAL_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rsmf/assembly.hpp"
#include "rsmf/blr.hpp"
#include "rsmf/hodlr.hpp"
#include "rsmf/sparse.hpp"

namespace rsmf {

enum class Compression { none, blr, hodlr };

inline const char* to_string(Compression c) {
  switch (c) {
    case Compression::none: return "dense";
    case Compression::blr: return "blr";
    default: return "hodlr";
  }
}

struct MfPolicy {
  Compression compression = Compression::none;
  double tol = 1e-6;
  index_t tile = 32;
  index_t leaf_size = 32;           // HODLR leaf for F11 cluster trees
  index_t threshold_dense = 256;    // fronts below this stay dense
  index_t oversample_extra = 10;    // Schur sketch probes beyond the rank estimate
  std::uint64_t seed = 0;
};

/// Update matrix passed up the tree. The payload already carries the Schur
/// minus sign (T = F22 - F21 F11^{-1} F12 with F22 assembled from zeros and
/// child updates), so extend_add is a pure scatter-add.
struct UpdateMatrix {
  index_t owner = -1;
  std::vector<index_t> indices;  // sorted global indices, = I^u of the owner
  DenseMatrix payload;
};

/// Dense working front of one assembly-tree node: the (s+u) x (s+u) matrix
/// blocked as [F11 F12; F21 F22] with s = |I^s| leading rows/columns.
struct FrontalMatrix {
  index_t node = -1;
  index_t begin = 0, end = 0;
  std::vector<index_t> update;  // I^u
  DenseMatrix F;

  index_t s() const { return end - begin; }
  index_t u() const { return static_cast<index_t>(update.size()); }
  index_t size() const { return s() + u(); }

  /// Local slot of a global index: fully-summed columns first, then I^u.
  index_t local(index_t g) const {
    if (g >= begin && g < end) return g - begin;
    auto it = std::lower_bound(update.begin(), update.end(), g);
    if (it == update.end() || *it != g)
      throw structural_error("extend_add: index " + std::to_string(g) +
                             " not present in front " + std::to_string(node));
    return s() + static_cast<index_t>(it - update.begin());
  }
};

/// Scatter-add of an update matrix into a front (two-pointer index
/// matching through local()); T itself is unchanged.
inline void extend_add(FrontalMatrix& F, const UpdateMatrix& T) {
  const index_t m = static_cast<index_t>(T.indices.size());
  std::vector<index_t> loc(static_cast<std::size_t>(m));
  for (index_t k = 0; k < m; ++k) loc[k] = F.local(T.indices[k]);
  for (index_t j = 0; j < m; ++j)
    for (index_t i = 0; i < m; ++i) F.F(loc[i], loc[j]) += T.payload(i, j);
}

/// One factored front; representation decides which members are active.
struct FactoredFront {
  index_t node = -1;
  index_t begin = 0, end = 0;
  std::vector<index_t> update;
  Compression rep = Compression::none;

  // dense: packed LU of F11 plus transformed panels
  DenseLu lu11;
  DenseMatrix W12;  // L^{-1} P F12
  DenseMatrix W21;  // F21 U^{-1}
  // blr: tile-factored F11, panels as low-rank with the same W transforms
  std::unique_ptr<BlrSolver> blr11;
  LowRank w12, w21;
  // hodlr: factored F11 plus the original couplings, low-rank
  std::unique_ptr<HodlrSolver> h11;
  LowRank b12, b21;

  index_t s() const { return end - begin; }
  index_t u() const { return static_cast<index_t>(update.size()); }
  index_t max_rank() const {
    switch (rep) {
      case Compression::none: return 0;
      case Compression::blr: {
        index_t r = std::max(w12.rank(), w21.rank());
        return std::max(r, blr11->tiles().max_rank());
      }
      default: {
        index_t r = std::max(b12.rank(), b21.rank());
        return std::max(r, h11->factor().max_offdiag_rank());
      }
    }
  }
  index_t stored_scalars() const {
    switch (rep) {
      case Compression::none:
        return s() * s() + W12.rows() * W12.cols() + W21.rows() * W21.cols();
      case Compression::blr:
        return blr11->tiles().stored_scalars() + w12.stored_scalars() + w21.stored_scalars();
      default:
        return h11->factor().stored_scalars() + b12.stored_scalars() + b21.stored_scalars();
    }
  }
};

struct MfStats {
  index_t n = 0;
  index_t nnz = 0;
  index_t fill = 0;        // stored factor scalars over all fronts
  index_t peak_front = 0;  // largest front dimension
  std::uint64_t flops = 0;  // leading-order flop model of the factorization
  double seconds = 0.0;
  struct NodeStat {
    index_t id, s, u;
    Compression rep;
    index_t max_rank;
  };
  std::vector<NodeStat> nodes;
};

/// Complete multifrontal factorization: factored fronts in assembly-tree
/// order, the outer scaling/permutation, the policy, and run statistics.
struct MfFactorization {
  AssemblyTree tree;
  std::vector<FactoredFront> fronts;
  ScalingPermutation scaling;  // applied by mf_solve; identity by default
  MfPolicy policy;
  MfStats stats;
};

namespace detail {

inline void assemble_a_block(FrontalMatrix& front, const SparseMatrix& A) {
  // Columns in I^s take rows from [begin, n) restricted to the front's
  // pattern; columns in I^u take only rows inside I^s (their remaining
  // coupling lives in ancestor fronts).
  for (index_t j = front.begin; j < front.end; ++j) {
    const index_t lj = j - front.begin;
    for (index_t k = A.column_starts[j]; k < A.column_starts[j + 1]; ++k) {
      const index_t i = A.row_indices[k];
      if (i < front.begin) continue;
      front.F(front.local(i), lj) += A.values[k];
    }
  }
  for (index_t c = 0; c < front.u(); ++c) {
    const index_t j = front.update[c];
    const index_t lj = front.s() + c;
    for (index_t k = A.column_starts[j]; k < A.column_starts[j + 1]; ++k) {
      const index_t i = A.row_indices[k];
      if (i >= front.begin && i < front.end) front.F(i - front.begin, lj) += A.values[k];
    }
  }
}

inline std::uint64_t dense_front_flops(index_t s, index_t u) {
  const std::uint64_t ss = static_cast<std::uint64_t>(s), uu = static_cast<std::uint64_t>(u);
  return 2 * ss * ss * ss / 3 + 2 * ss * ss * uu + 2 * uu * uu * ss;
}

}  // namespace detail

/// Factor one assembled front under the policy; returns the update matrix
/// for the parent (empty for u = 0) and appends the factored front.
inline UpdateMatrix factor_front(FrontalMatrix&& front, const MfPolicy& policy,
                                 FactoredFront& out, std::uint64_t& flops) {
  const index_t s = front.s(), u = front.u();
  out.node = front.node;
  out.begin = front.begin;
  out.end = front.end;
  out.update = front.update;

  Compression rep = policy.compression;
  if (front.size() < policy.threshold_dense) rep = Compression::none;
  if (rep == Compression::blr && s < 2 * policy.tile) rep = Compression::none;
  if (rep == Compression::hodlr && s < 2 * policy.leaf_size) rep = Compression::none;
  out.rep = rep;

  DenseMatrix F11 = front.F.block(0, 0, s, s);
  DenseMatrix F12 = front.F.block(0, s, s, u);
  DenseMatrix F21 = front.F.block(s, 0, u, s);
  DenseMatrix T = front.F.block(s, s, u, u);
  front.F = DenseMatrix();

  try {
    switch (rep) {
      case Compression::none: {
        out.lu11 = lu_partial_pivot(std::move(F11));
        out.W12 = lu_lower_solve(out.lu11, std::move(F12));
        out.W21 = lu_right_upper_solve(out.lu11, F21);
        if (u > 0) T = gemm(-1.0, out.W21, out.W12, 1.0, T);
        flops += detail::dense_front_flops(s, u);
        break;
      }
      case Compression::blr: {
        out.blr11 = std::make_unique<BlrSolver>(blr_compress(F11, policy.tile, policy.tol));
        LowRank f12 = truncated_svd(F12, policy.tol);
        LowRank f21 = truncated_svd(F21, policy.tol);
        out.w12 = LowRank{out.blr11->forward(f12.U), f12.V, policy.tol, true};
        out.w21 = LowRank{f21.U, out.blr11->upper_transposed(f21.V), policy.tol, true};
        if (u > 0 && out.w12.rank() > 0 && out.w21.rank() > 0) {
          DenseMatrix mid = matmul(out.w21.V.transposed(), out.w12.U);  // r21 x r12
          T = gemm(-1.0, matmul(out.w21.U, mid), out.w12.V.transposed(), 1.0, T);
        }
        flops += detail::dense_front_flops(s, 0) / 4 +
                 2ull * static_cast<std::uint64_t>(s) * u *
                     static_cast<std::uint64_t>(out.w12.rank() + out.w21.rank() + 1);
        break;
      }
      case Compression::hodlr: {
        auto ctree = build_cluster_tree(s, policy.leaf_size);
        HodlrMatrix H = hodlr_compress(
            [&](index_t i, index_t j) { return F11(i, j); }, ctree, policy.tol);
        out.h11 = std::make_unique<HodlrSolver>(std::move(H));
        out.b12 = truncated_svd(F12, policy.tol);
        out.b21 = truncated_svd(F21, policy.tol);
        if (u > 0 && out.b12.rank() > 0 && out.b21.rank() > 0) {
          // Schur product F21 F11^{-1} F12 = U21 (V21^T Y) V12^T, then a
          // sketched recompression with rank-estimate + extra probes.
          DenseMatrix Y = out.h11->solve(out.b12.U);
          DenseMatrix mid = matmul(out.b21.V.transposed(), Y);  // r21 x r12
          const index_t probes =
              std::min<index_t>(std::min(out.b12.rank(), out.b21.rank()) + policy.oversample_extra,
                                std::min(u, u));
          LowRank S = randomized_range(
              [&](const DenseMatrix& X) {
                return matmul(out.b21.U, matmul(mid, matmul(out.b12.V.transposed(), X)));
              },
              [&](const DenseMatrix& X) {
                return matmul(out.b12.V, matmul(mid.transposed(), matmul(out.b21.U.transposed(), X)));
              },
              u, u, policy.tol, probes,
              policy.seed + static_cast<std::uint64_t>(front.node) * 7919u);
          if (S.rank() > 0) T = gemm(-1.0, S.U, S.V.transposed(), 1.0, T);
        }
        flops += detail::dense_front_flops(s, 0) / 4 +
                 2ull * static_cast<std::uint64_t>(s) * u *
                     static_cast<std::uint64_t>(out.b12.rank() + out.b21.rank() + 1);
        break;
      }
    }
  } catch (const singular_error& e) {
    throw singular_error(std::string("factor_front: singular F11 in node ") +
                             std::to_string(front.node) + ": " + e.what(),
                         front.node);
  }

  UpdateMatrix up;
  up.owner = front.node;
  up.indices = out.update;
  up.payload = std::move(T);
  return up;
}

/// Multifrontal factorization of a preprocessed (equilibrated, permuted)
/// matrix over its assembly tree. Traversal is children-before-parent via
/// the ready-set schedule, drained sequentially in node order.
inline MfFactorization multifrontal_factorize(const SparseMatrix& A, const AssemblyTree& tree,
                                              const MfPolicy& policy) {
  if (A.n_rows != A.n_cols) throw structural_error("multifrontal_factorize: matrix not square");
  MfFactorization fac;
  fac.tree = tree;
  fac.policy = policy;
  fac.scaling.d_row.assign(static_cast<std::size_t>(A.n_rows), 1.0);
  fac.scaling.d_col.assign(static_cast<std::size_t>(A.n_cols), 1.0);
  fac.scaling.p_row.resize(static_cast<std::size_t>(A.n_rows));
  fac.scaling.p_col.resize(static_cast<std::size_t>(A.n_cols));
  for (index_t i = 0; i < A.n_rows; ++i) fac.scaling.p_row[i] = fac.scaling.p_col[i] = i;
  fac.fronts.resize(tree.nodes.size());
  fac.stats.n = A.n_rows;
  fac.stats.nnz = A.nnz();

  std::vector<std::optional<UpdateMatrix>> updates(tree.nodes.size());
  AssemblySchedule schedule(tree);
  while (!schedule.done()) {
    for (index_t id : schedule.ready()) {
      const auto& nd = tree.nodes[id];
      FrontalMatrix front;
      front.node = id;
      front.begin = nd.begin;
      front.end = nd.end;
      front.update = nd.update;
      front.F = DenseMatrix(front.size(), front.size());
      detail::assemble_a_block(front, A);
      for (index_t c : nd.children) {
        if (!updates[c]) throw structural_error("multifrontal: missing child update");
        extend_add(front, *updates[c]);
        updates[c].reset();  // released only after the parent consumed it
      }
      fac.stats.peak_front = std::max(fac.stats.peak_front, front.size());
      UpdateMatrix up = factor_front(std::move(front), policy, fac.fronts[id], fac.stats.flops);
      if (nd.parent >= 0)
        updates[id] = std::move(up);
      schedule.complete(id);
    }
  }
  for (const auto& f : fac.fronts) {
    fac.stats.fill += f.stored_scalars();
    fac.stats.nodes.push_back({f.node, f.s(), f.u(), f.rep, f.max_rank()});
  }
  return fac;
}

/// x = D_c P_c^T U^{-1} L^{-1} (P_c P_r D_r b): scale, permute, forward
/// sweep leaves-to-root, backward sweep root-to-leaves, permute and scale
/// back. P_r is the identity (all row pivoting lives inside the fronts).
inline std::vector<double> mf_solve(const MfFactorization& fac, const std::vector<double>& b) {
  const index_t n = fac.stats.n;
  std::vector<double> w(static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) {
    const index_t src = fac.scaling.p_row[fac.scaling.p_col[i]];
    w[i] = b[src] * fac.scaling.d_row[src];
  }
  auto gather = [&](const FactoredFront& f) {
    DenseMatrix B(f.s(), 1);
    for (index_t i = 0; i < f.s(); ++i) B(i, 0) = w[f.begin + i];
    return B;
  };
  std::vector<DenseMatrix> stash(fac.fronts.size());

  // forward: z_s per node, scatter the panel update into b's I^u entries
  for (std::size_t id = 0; id < fac.fronts.size(); ++id) {
    const auto& f = fac.fronts[id];
    DenseMatrix bs = gather(f);
    DenseMatrix upd;  // W21 * z (dense/blr) or B21 F11^{-1} b_s (hodlr)
    switch (f.rep) {
      case Compression::none: {
        stash[id] = lu_lower_solve(f.lu11, std::move(bs));
        if (f.u() > 0) upd = matmul(f.W21, stash[id]);
        break;
      }
      case Compression::blr: {
        stash[id] = f.blr11->forward(std::move(bs));
        if (f.u() > 0 && f.w21.rank() > 0)
          upd = matmul(f.w21.U, matmul(f.w21.V.transposed(), stash[id]));
        break;
      }
      default: {
        stash[id] = std::move(bs);
        if (f.u() > 0 && f.b21.rank() > 0) {
          DenseMatrix z = f.h11->solve(stash[id]);
          upd = matmul(f.b21.U, matmul(f.b21.V.transposed(), z));
        }
        break;
      }
    }
    if (!upd.empty())
      for (index_t i = 0; i < f.u(); ++i) w[f.update[i]] -= upd(i, 0);
  }

  // backward: x_s = U^{-1}(z_s - W12 x_u) or F11^{-1}(y_s - B12 x_u)
  for (index_t id = static_cast<index_t>(fac.fronts.size()) - 1; id >= 0; --id) {
    const auto& f = fac.fronts[id];
    DenseMatrix xu(f.u(), 1);
    for (index_t i = 0; i < f.u(); ++i) xu(i, 0) = w[f.update[i]];
    DenseMatrix rhs = std::move(stash[id]);
    switch (f.rep) {
      case Compression::none: {
        if (f.u() > 0) rhs = gemm(-1.0, f.W12, xu, 1.0, rhs);
        rhs = lu_upper_solve(f.lu11, rhs);
        break;
      }
      case Compression::blr: {
        if (f.u() > 0 && f.w12.rank() > 0)
          rhs = gemm(-1.0, f.w12.U, matmul(f.w12.V.transposed(), xu), 1.0, rhs);
        rhs = f.blr11->backward(std::move(rhs));
        break;
      }
      default: {
        if (f.u() > 0 && f.b12.rank() > 0)
          rhs = gemm(-1.0, f.b12.U, matmul(f.b12.V.transposed(), xu), 1.0, rhs);
        rhs = f.h11->solve(rhs);
        break;
      }
    }
    for (index_t i = 0; i < f.s(); ++i) w[f.begin + i] = rhs(i, 0);
  }

  std::vector<double> x(static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) x[fac.scaling.p_col[i]] = w[i];
  for (index_t i = 0; i < n; ++i) x[i] *= fac.scaling.d_col[i];
  return x;
}

/// Exported exact triangular factors in the pivot-adjusted row order: with
/// pivrow mapping unpivoted global slots to their pivoted positions,
/// L U = Ptilde (A_permuted) where Ptilde is the per-front pivoting. L keeps
/// its unit diagonal stored. Only meaningful for compression = none.
struct ExportedFactors {
  SparseMatrix L;
  SparseMatrix U;
  std::vector<index_t> pivrow;        // pivrow[unpivoted slot] = pivoted row
  std::vector<index_t> snode_begin;
};

inline ExportedFactors mf_export_factors(const MfFactorization& fac) {
  const index_t n = fac.stats.n;
  ExportedFactors out;
  out.pivrow.resize(static_cast<std::size_t>(n));
  for (const auto& f : fac.fronts) {
    if (f.rep != Compression::none)
      throw structural_error("mf_export_factors: factorization is not exact");
    // p[i] = unpivoted local row landing at pivoted position i.
    auto p = f.lu11.perm();
    for (index_t i = 0; i < f.s(); ++i) out.pivrow[f.begin + p[i]] = f.begin + i;
  }
  std::vector<index_t> lrows, lcols, urows, ucols;
  std::vector<double> lvals, uvals;
  for (const auto& f : fac.fronts) {
    for (index_t j = 0; j < f.s(); ++j) {
      lrows.push_back(f.begin + j);
      lcols.push_back(f.begin + j);
      lvals.push_back(1.0);
      for (index_t i = j + 1; i < f.s(); ++i) {
        lrows.push_back(f.begin + i);
        lcols.push_back(f.begin + j);
        lvals.push_back(f.lu11.lu(i, j));
      }
      // Update rows live at their ancestors' pivoted positions.
      for (index_t i = 0; i < f.u(); ++i) {
        if (f.W21(i, j) == 0.0) continue;
        lrows.push_back(out.pivrow[f.update[i]]);
        lcols.push_back(f.begin + j);
        lvals.push_back(f.W21(i, j));
      }
      for (index_t i = 0; i <= j; ++i) {
        urows.push_back(f.begin + i);
        ucols.push_back(f.begin + j);
        uvals.push_back(f.lu11.lu(i, j));
      }
    }
    for (index_t c = 0; c < f.u(); ++c)
      for (index_t i = 0; i < f.s(); ++i) {
        if (f.W12(i, c) == 0.0) continue;
        urows.push_back(f.begin + i);
        ucols.push_back(f.update[c]);
        uvals.push_back(f.W12(i, c));
      }
  }
  out.L = sparse_from_triplets(n, n, std::move(lrows), std::move(lcols), std::move(lvals));
  out.U = sparse_from_triplets(n, n, std::move(urows), std::move(ucols), std::move(uvals));
  for (const auto& f : fac.fronts) out.snode_begin.push_back(f.begin);
  out.snode_begin.push_back(n);
  return out;
}

}  // namespace rsmf

#endif
