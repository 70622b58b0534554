#ifndef RSMF_SOLVER_HPP
#define RSMF_SOLVER_HPP

#include "rsmf/multifrontal.hpp"
#include "rsmf/ordering.hpp"

namespace rsmf {

struct PipelineOptions {
  MfPolicy policy;
  index_t nd_leaf_cutoff = 64;
  bool equilibrate = true;
};

struct Pipeline {
  Equilibration eq;
  NestedDissection nd;
  EliminationStructure es;
  SparseMatrix A_pre;  // equilibrated and symmetrically permuted
  MfFactorization fac;
};

/// Factor-and-solve pipeline: equilibrate, order (nested dissection),
/// symbolic factorization, multifrontal numeric factorization. The returned
/// factorization carries the outer scaling/permutation, so mf_solve on it
/// solves the original system.
inline Pipeline factorize_system(const SparseMatrix& A,
                                 const std::vector<std::vector<double>>* coords,
                                 const PipelineOptions& opts) {
  Pipeline p;
  if (opts.equilibrate) {
    p.eq = rsmf::equilibrate(A);
  } else {
    p.eq.scaled = A;
    p.eq.d_row.assign(static_cast<std::size_t>(A.n_rows), 1.0);
    p.eq.d_col.assign(static_cast<std::size_t>(A.n_cols), 1.0);
  }
  p.nd = nested_dissection(p.eq.scaled, coords, opts.nd_leaf_cutoff);
  p.es = symbolic_factorize(p.eq.scaled, p.nd.p_col);
  p.A_pre = permute(p.eq.scaled, p.nd.p_col, p.nd.p_col);
  AssemblyTree tree = build_assembly_tree(p.es);
  p.fac = multifrontal_factorize(p.A_pre, tree, opts.policy);
  p.fac.scaling.d_row = p.eq.d_row;
  p.fac.scaling.d_col = p.eq.d_col;
  p.fac.scaling.p_col = p.nd.p_col;
  // P_r stays the identity; row pivoting happens inside the fronts.
  return p;
}

inline double relative_residual(const SparseMatrix& A, const std::vector<double>& x,
                                const std::vector<double>& b) {
  auto Ax = A.apply(x);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    num += (Ax[i] - b[i]) * (Ax[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / (den == 0 ? 1.0 : std::sqrt(den));
}

}  // namespace rsmf

#endif
