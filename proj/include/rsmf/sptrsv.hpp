#ifndef RSMF_SPTRSV_HPP
#define RSMF_SPTRSV_HPP

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rsmf/multifrontal.hpp"
#include "rsmf/sparse.hpp"

namespace rsmf {

/// alpha-beta-gamma machine: seconds per message, per transferred scalar,
/// and per flop. Defaults follow measured interconnect constants
/// (alpha = 1.7 us, beta = 4e-11 s/byte * 8 bytes, flop time 1e-11 s).
struct MachineModel {
  double alpha = 1.7e-6;
  double beta = 3.2e-10;
  double gamma = 1e-11;
};

/// Task-dependency DAG of a supernodal triangular solve: one vertex per
/// supernode (weight = flops of its diagonal solve plus incoming matvecs),
/// one edge per off-diagonal block coupling (weight = solution scalars
/// transferred).
struct TaskDag {
  struct Edge {
    index_t from = -1, to = -1;
    index_t scalars = 0;
  };
  std::vector<std::uint64_t> vertex_flops;
  std::vector<Edge> edges;
  std::vector<std::vector<index_t>> in_edges;   // edge ids per target vertex
  std::vector<std::vector<index_t>> out_edges;  // edge ids per source vertex
  std::vector<index_t> levels;                  // level per vertex

  index_t n_vertices() const { return static_cast<index_t>(vertex_flops.size()); }

  std::string to_dot() const {
    std::ostringstream os;
    os << "digraph sptrsv {\n";
    for (index_t v = 0; v < n_vertices(); ++v)
      os << "  t" << v << " [label=\"" << v << "\\nflops=" << vertex_flops[v]
         << "\\nlevel=" << (levels.empty() ? -1 : levels[v]) << "\"];\n";
    for (const auto& e : edges)
      os << "  t" << e.from << " -> t" << e.to << " [label=\"" << e.scalars << "\"];\n";
    os << "}\n";
    return os.str();
  }
};

/// Level assignment: level(v) = 1 + max level over predecessors, sources at
/// level 0; Kahn's scheme, rejecting cycles, vertex-index tie-breaking.
inline std::vector<std::vector<index_t>> level_sets(TaskDag& dag) {
  const index_t nv = dag.n_vertices();
  std::vector<index_t> indeg(static_cast<std::size_t>(nv), 0);
  for (const auto& e : dag.edges) ++indeg[e.to];
  dag.levels.assign(static_cast<std::size_t>(nv), 0);
  std::vector<index_t> frontier;
  for (index_t v = 0; v < nv; ++v)
    if (indeg[v] == 0) frontier.push_back(v);
  index_t seen = 0;
  std::vector<std::vector<index_t>> sets;
  while (!frontier.empty()) {
    std::sort(frontier.begin(), frontier.end());
    seen += static_cast<index_t>(frontier.size());
    std::vector<index_t> next;
    for (index_t v : frontier)
      for (index_t eid : dag.out_edges[v]) {
        const auto& e = dag.edges[eid];
        dag.levels[e.to] = std::max(dag.levels[e.to], dag.levels[v] + 1);
        if (--indeg[e.to] == 0) next.push_back(e.to);
      }
    sets.push_back(std::move(frontier));
    frontier = std::move(next);
  }
  if (seen != nv) throw structural_error("level_sets: cycle detected");
  // Kahn pops can outrun the level assignment; regroup by final level.
  std::vector<std::vector<index_t>> by_level;
  for (index_t v = 0; v < nv; ++v) {
    const index_t l = dag.levels[v];
    if (static_cast<index_t>(by_level.size()) <= l)
      by_level.resize(static_cast<std::size_t>(l) + 1);
    by_level[l].push_back(v);
  }
  return by_level;
}

/// DAG of the lower-triangular solve on L with the given supernode
/// partition. Edge scalars count distinct source columns referenced; vertex
/// flops count the dense diagonal solve plus 2 flops per off-block entry.
inline TaskDag build_task_dag(const SparseMatrix& L, const std::vector<index_t>& snode_begin) {
  const index_t n = L.n_cols;
  const index_t ns = static_cast<index_t>(snode_begin.size()) - 1;
  for (index_t j = 0; j < n; ++j) {
    bool has_diag = false;
    for (index_t k = L.column_starts[j]; k < L.column_starts[j + 1]; ++k) {
      if (L.row_indices[k] < j)
        throw structural_error("build_task_dag: matrix is not lower triangular");
      if (L.row_indices[k] == j && L.values[k] != 0.0) has_diag = true;
    }
    if (!has_diag) throw singular_error("build_task_dag: zero diagonal", j);
  }
  std::vector<index_t> snode_of(static_cast<std::size_t>(n));
  for (index_t s = 0; s < ns; ++s)
    for (index_t j = snode_begin[s]; j < snode_begin[s + 1]; ++j) snode_of[j] = s;

  TaskDag dag;
  dag.vertex_flops.assign(static_cast<std::size_t>(ns), 0);
  dag.in_edges.resize(static_cast<std::size_t>(ns));
  dag.out_edges.resize(static_cast<std::size_t>(ns));
  // scalars per (source, target): distinct columns of the source referenced
  std::vector<std::vector<std::pair<index_t, index_t>>> coupling(
      static_cast<std::size_t>(ns));  // per target: (source, scalars) accumulation
  for (index_t s = 0; s < ns; ++s) {
    const index_t b = snode_begin[s], e = snode_begin[s + 1];
    std::uint64_t flops = 2ull * static_cast<std::uint64_t>(e - b) * (e - b);  // diag TRSV
    for (index_t j = b; j < e; ++j) {
      std::vector<index_t> hit;  // targets this column contributes to
      for (index_t k = L.column_starts[j]; k < L.column_starts[j + 1]; ++k) {
        const index_t t = snode_of[L.row_indices[k]];
        if (t == s) continue;
        dag.vertex_flops[t] += 2;  // one multiply-add in the target's matvec
        hit.push_back(t);
      }
      std::sort(hit.begin(), hit.end());
      hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
      for (index_t t : hit) {
        auto& list = coupling[t];
        if (!list.empty() && list.back().first == s)
          ++list.back().second;
        else
          list.emplace_back(s, 1);
      }
    }
    dag.vertex_flops[s] += flops;
  }
  for (index_t t = 0; t < ns; ++t)
    for (auto& [s, scalars] : coupling[t]) {
      const index_t eid = static_cast<index_t>(dag.edges.size());
      dag.edges.push_back({s, t, scalars});
      dag.out_edges[s].push_back(eid);
      dag.in_edges[t].push_back(eid);
    }
  level_sets(dag);
  return dag;
}

inline TaskDag build_task_dag(const ExportedFactors& f) {
  return build_task_dag(f.L, f.snode_begin);
}

/// Level-scheduled lower-triangular solve. Each task accumulates its
/// incoming contributions in a fixed (column-ascending) order, so the result
/// is bitwise independent of the execution order within a level and matches
/// plain sequential forward substitution operation for operation.
inline std::vector<double> sptrsv_levelwise(const SparseMatrix& L, const std::vector<double>& b,
                                            const std::vector<index_t>& snode_begin,
                                            const std::vector<std::vector<index_t>>* schedule =
                                                nullptr) {
  const index_t n = L.n_cols;
  TaskDag dag = build_task_dag(L, snode_begin);
  auto sets = level_sets(dag);
  if (schedule) sets = *schedule;
  const index_t ns = static_cast<index_t>(snode_begin.size()) - 1;
  std::vector<index_t> snode_of(static_cast<std::size_t>(n));
  for (index_t s = 0; s < ns; ++s)
    for (index_t j = snode_begin[s]; j < snode_begin[s + 1]; ++j) snode_of[j] = s;
  // Incoming entries per supernode in (column, row) ascending order.
  std::vector<std::vector<std::tuple<index_t, index_t, double>>> incoming(
      static_cast<std::size_t>(ns));
  for (index_t c = 0; c < n; ++c)
    for (index_t k = L.column_starts[c]; k < L.column_starts[c + 1]; ++k) {
      const index_t r = L.row_indices[k];
      if (snode_of[r] != snode_of[c]) incoming[snode_of[r]].emplace_back(c, r, L.values[k]);
    }
  std::vector<double> x(b);
  for (const auto& level : sets)
    for (index_t s : level) {
      const index_t bg = snode_begin[s], en = snode_begin[s + 1];
      std::vector<double> local(x.begin() + bg, x.begin() + en);
      for (const auto& [c, r, v] : incoming[s]) local[r - bg] -= v * x[c];
      for (index_t c = bg; c < en; ++c) {
        double diag = 0.0;
        // in-block forward substitution in stored order
        for (index_t k = L.column_starts[c]; k < L.column_starts[c + 1]; ++k)
          if (L.row_indices[k] == c) diag = L.values[k];
        local[c - bg] /= diag;
        const double xc = local[c - bg];
        for (index_t k = L.column_starts[c]; k < L.column_starts[c + 1]; ++k) {
          const index_t r = L.row_indices[k];
          if (r > c && r < en) local[r - bg] -= L.values[k] * xc;
        }
      }
      for (index_t c = bg; c < en; ++c) x[c] = local[c - bg];
    }
  return x;
}

/// Plain sequential forward substitution, the reference the level-scheduled
/// solve is checked against.
inline std::vector<double> sptrsv_sequential(const SparseMatrix& L, const std::vector<double>& b) {
  const index_t n = L.n_cols;
  std::vector<double> x(b);
  for (index_t c = 0; c < n; ++c) {
    double diag = 0.0;
    for (index_t k = L.column_starts[c]; k < L.column_starts[c + 1]; ++k)
      if (L.row_indices[k] == c) diag = L.values[k];
    if (diag == 0.0) throw singular_error("sptrsv: zero diagonal", c);
    x[c] /= diag;
    for (index_t k = L.column_starts[c]; k < L.column_starts[c + 1]; ++k) {
      const index_t r = L.row_indices[k];
      if (r > c) x[r] -= L.values[k] * x[c];
    }
  }
  return x;
}

enum class CostMode { async, sync };

/// Critical path of the DAG under the machine model and a vertex-to-process
/// map: flops cost gamma each, cross-process edges cost alpha plus
/// beta * scalars, intra-process edges are free. Sync mode adds the
/// level-barrier term alpha * log2(P) per level.
inline double critical_path_cost(const TaskDag& dag, const MachineModel& model,
                                 const std::vector<index_t>& partition,
                                 CostMode mode = CostMode::async) {
  const index_t nv = dag.n_vertices();
  if (nv == 0) return 0.0;
  TaskDag tmp = dag;
  auto sets = level_sets(tmp);
  std::vector<double> cost(static_cast<std::size_t>(nv), 0.0);
  double best = 0.0;
  for (const auto& level : sets)
    for (index_t v : level) {
      double c = 0.0;
      for (index_t eid : tmp.in_edges[v]) {
        const auto& e = tmp.edges[eid];
        double edge_cost = 0.0;
        if (partition[e.from] != partition[e.to])
          edge_cost = model.alpha + model.beta * static_cast<double>(e.scalars);
        c = std::max(c, cost[e.from] + edge_cost);
      }
      cost[v] = c + model.gamma * static_cast<double>(tmp.vertex_flops[v]);
      best = std::max(best, cost[v]);
    }
  if (mode == CostMode::sync) {
    index_t nproc = 0;
    for (auto p : partition) nproc = std::max(nproc, p + 1);
    if (nproc > 1)
      best += static_cast<double>(sets.size()) * model.alpha *
              std::log2(static_cast<double>(nproc));
  }
  return best;
}

inline std::string level_histogram_csv(const TaskDag& dag) {
  TaskDag tmp = dag;
  auto sets = level_sets(tmp);
  std::ostringstream os;
  os << "level,tasks\n";
  for (std::size_t l = 0; l < sets.size(); ++l) os << l << "," << sets[l].size() << "\n";
  return os.str();
}

}  // namespace rsmf

#endif
