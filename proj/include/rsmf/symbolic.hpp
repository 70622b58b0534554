#ifndef RSMF_SYMBOLIC_HPP
#define RSMF_SYMBOLIC_HPP

#include <algorithm>
#include <vector>

#include "rsmf/ordering.hpp"
#include "rsmf/sparse.hpp"

namespace rsmf {

/// Supernodal symbolic factorization of the permuted, pattern-symmetrized
/// matrix. Column patterns are the exact symbolic Cholesky/LU fill; the
/// supernode partition is fundamental supernodes relaxed by amalgamation.
/// All indices refer to the permuted ordering.
struct EliminationStructure {
  index_t n = 0;
  std::vector<index_t> snode_begin;             // supernode s covers [begin[s], begin[s+1])
  std::vector<index_t> etree_parent;            // parent supernode, -1 at roots
  std::vector<std::vector<index_t>> snode_rows;  // I^u: update rows below the columns
  std::vector<std::vector<index_t>> col_pattern;  // exact strictly-below-diagonal fill per column

  index_t n_supernodes() const { return static_cast<index_t>(etree_parent.size()); }
  index_t snode_cols(index_t s) const { return snode_begin[s + 1] - snode_begin[s]; }
  index_t snode_of_col(index_t j) const {
    auto it = std::upper_bound(snode_begin.begin(), snode_begin.end(), j);
    return static_cast<index_t>(it - snode_begin.begin()) - 1;
  }

  /// Exact number of stored entries of L (diagonal included).
  index_t exact_factor_nnz() const {
    index_t s = n;
    for (const auto& p : col_pattern) s += static_cast<index_t>(p.size());
    return s;
  }

  /// Entries the supernodal fronts store for both factors:
  /// per node s*s + 2*s*u (dense diagonal block plus the L and U panels).
  index_t supernodal_factor_entries() const {
    index_t total = 0;
    for (index_t s = 0; s < n_supernodes(); ++s) {
      const index_t sc = snode_cols(s);
      const index_t u = static_cast<index_t>(snode_rows[s].size());
      total += sc * sc + 2 * sc * u;
    }
    return total;
  }
};

namespace detail {

/// Exact symbolic elimination on adjacency lists: pattern_j = lower(A)_j
/// union of children patterns minus {j}; parent(j) = min(pattern_j).
inline std::vector<std::vector<index_t>> symbolic_column_patterns(
    const std::vector<std::vector<index_t>>& adj) {
  const index_t n = static_cast<index_t>(adj.size());
  std::vector<std::vector<index_t>> pattern(static_cast<std::size_t>(n));
  std::vector<std::vector<index_t>> children(static_cast<std::size_t>(n));
  std::vector<char> mark(static_cast<std::size_t>(n), 0);
  for (index_t j = 0; j < n; ++j) {
    std::vector<index_t> rows;
    for (auto i : adj[j])
      if (i > j && !mark[i]) {
        mark[i] = 1;
        rows.push_back(i);
      }
    for (auto c : children[j])
      for (auto i : pattern[c])
        if (i != j && !mark[i]) {
          mark[i] = 1;
          rows.push_back(i);
        }
    std::sort(rows.begin(), rows.end());
    for (auto i : rows) mark[i] = 0;
    if (!rows.empty()) children[rows.front()].push_back(j);
    pattern[j] = std::move(rows);
  }
  return pattern;
}

}  // namespace detail

/// Exact (pre-amalgamation) fill pattern of the permuted symmetrized matrix;
/// also the brute-force-comparable oracle surface.
inline std::vector<std::vector<index_t>> exact_symbolic_pattern(const SparseMatrix& A,
                                                                const std::vector<index_t>& p_col) {
  return detail::symbolic_column_patterns(symmetrized_adjacency(permute(A, p_col, p_col)));
}

/// Supernodal symbolic factorization. `relax` is the relaxed-amalgamation
/// budget: a child merges into its column-adjacent parent when the extra
/// (padding) entries stay within `relax` of the merged front's storage.
inline EliminationStructure symbolic_factorize(const SparseMatrix& A,
                                               const std::vector<index_t>& p_col,
                                               double relax = 0.25) {
  EliminationStructure es;
  es.n = A.n_cols;
  es.col_pattern = exact_symbolic_pattern(A, p_col);
  const index_t n = es.n;

  // Fundamental supernodes: column j extends the run iff parent(j-1) == j
  // and pattern_{j-1} = pattern_j + {j} (checked via counts, subset holds).
  std::vector<index_t> begin;
  for (index_t j = 0; j < n; ++j) {
    const bool extend =
        j > 0 && !es.col_pattern[j - 1].empty() && es.col_pattern[j - 1].front() == j &&
        static_cast<index_t>(es.col_pattern[j - 1].size()) ==
            static_cast<index_t>(es.col_pattern[j].size()) + 1;
    if (!extend) begin.push_back(j);
  }
  begin.push_back(n);

  struct Node {
    index_t begin, end;
    std::vector<index_t> rows;  // update rows (strictly past `end - 1`)
    index_t parent = -1;
    index_t base_storage = 0;  // sum of the constituent fundamental supernodes'
    bool alive = true;         // front storage; the amalgamation baseline
  };
  const index_t ns0 = static_cast<index_t>(begin.size()) - 1;
  std::vector<Node> nodes(static_cast<std::size_t>(ns0));
  auto snode_of = [&](index_t col) {
    auto it = std::upper_bound(begin.begin(), begin.end(), col);
    return static_cast<index_t>(it - begin.begin()) - 1;
  };
  auto stored = [](index_t sc, index_t u) { return sc * sc + 2 * sc * u; };
  for (index_t s = 0; s < ns0; ++s) {
    nodes[s].begin = begin[s];
    nodes[s].end = begin[s + 1];
    // Union of the member columns' patterns beyond the supernode.
    std::vector<index_t> rows;
    for (index_t j = nodes[s].begin; j < nodes[s].end; ++j)
      for (auto i : es.col_pattern[j])
        if (i >= nodes[s].end) rows.push_back(i);
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    nodes[s].rows = std::move(rows);
    nodes[s].parent = nodes[s].rows.empty() ? -1 : snode_of(nodes[s].rows.front());
    nodes[s].base_storage =
        stored(nodes[s].end - nodes[s].begin, static_cast<index_t>(nodes[s].rows.size()));
  }

  // Relaxed amalgamation, children into column-adjacent parents, repeated
  // until a fixpoint. The padding budget is cumulative: the merged front's
  // storage may exceed the sum of the constituent fundamental supernodes'
  // storage by at most `relax`, which keeps merge chains from ratcheting.
  std::vector<index_t> absorbed_into(static_cast<std::size_t>(ns0), -1);
  auto resolve = [&](index_t s) {
    while (!nodes[s].alive) s = absorbed_into[s];
    return s;
  };
  bool merged_any = true;
  while (merged_any) {
    merged_any = false;
    for (index_t s = 0; s < ns0; ++s) {
      if (!nodes[s].alive) continue;
      const index_t p = nodes[s].parent;
      if (p < 0 || !nodes[p].alive || nodes[s].end != nodes[p].begin) continue;
      const index_t sc_c = nodes[s].end - nodes[s].begin;
      const index_t sc_p = nodes[p].end - nodes[p].begin;
      std::vector<index_t> urows;
      for (auto i : nodes[s].rows)
        if (i >= nodes[p].end) urows.push_back(i);
      std::vector<index_t> merged_rows(urows.size() + nodes[p].rows.size());
      std::merge(urows.begin(), urows.end(), nodes[p].rows.begin(), nodes[p].rows.end(),
                 merged_rows.begin());
      merged_rows.erase(std::unique(merged_rows.begin(), merged_rows.end()), merged_rows.end());
      const index_t base = nodes[s].base_storage + nodes[p].base_storage;
      const index_t after =
          stored(sc_c + sc_p, static_cast<index_t>(merged_rows.size()));
      if (after - base > static_cast<index_t>(relax * static_cast<double>(after))) continue;
      nodes[p].begin = nodes[s].begin;
      nodes[p].rows = std::move(merged_rows);
      nodes[p].base_storage = base;
      nodes[s].alive = false;
      absorbed_into[s] = p;
      for (index_t t = 0; t < ns0; ++t)
        if (nodes[t].alive && nodes[t].parent == s) nodes[t].parent = p;
      nodes[p].parent =
          nodes[p].rows.empty() ? -1 : resolve(snode_of(nodes[p].rows.front()));
      merged_any = true;
    }
  }

  // Compact into the result, remapping parents.
  std::vector<index_t> remap(static_cast<std::size_t>(ns0), -1);
  for (index_t s = 0; s < ns0; ++s)
    if (nodes[s].alive) {
      remap[s] = static_cast<index_t>(es.etree_parent.size());
      es.etree_parent.push_back(-2);  // placeholder
      es.snode_begin.push_back(nodes[s].begin);
      es.snode_rows.push_back(nodes[s].rows);
    }
  es.snode_begin.push_back(n);
  index_t out = 0;
  for (index_t s = 0; s < ns0; ++s)
    if (nodes[s].alive)
      es.etree_parent[out++] = nodes[s].parent < 0 ? -1 : remap[nodes[s].parent];
  return es;
}

}  // namespace rsmf

#endif
