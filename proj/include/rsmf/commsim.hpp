#ifndef RSMF_COMMSIM_HPP
#define RSMF_COMMSIM_HPP

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rsmf/ordering.hpp"
#include "rsmf/sptrsv.hpp"
#include "rsmf/symbolic.hpp"

namespace rsmf {

/// Logical Px x Py x Pz process grid; Pz layers of 2D grids. Pz must be a
/// power of two (the etree halving scheme requires it).
struct ProcessGrid3D {
  index_t px = 1, py = 1, pz = 1;

  index_t total() const { return px * py * pz; }
  index_t layer_procs() const { return px * py; }

  static bool power_of_two(index_t v) { return v >= 1 && (v & (v - 1)) == 0; }

  void validate() const {
    if (px < 1 || py < 1 || pz < 1) throw config_error("process grid: dimensions must be >= 1");
    if (!power_of_two(pz)) throw config_error("process grid: pz must be a power of two");
  }
};

/// Binary elimination-tree view with per-node front sizes, the input both
/// simulators consume. s = fully-summed count, u = update-row count.
struct CommTree {
  struct Node {
    index_t s = 0, u = 0;
    index_t parent = -1;
    std::vector<index_t> children;
    int depth = 0;
  };
  std::vector<Node> nodes;
  index_t root = -1;

  index_t size() const { return static_cast<index_t>(nodes.size()); }
};

/// Separator-tree view: u of a node is modeled as the sum of its ancestors'
/// separator sizes (dense separator coupling, the planar model assumption).
inline CommTree comm_tree_from_separators(const SeparatorTree& st) {
  CommTree t;
  t.nodes.resize(st.nodes.size());
  for (std::size_t i = 0; i < st.nodes.size(); ++i) {
    t.nodes[i].s = static_cast<index_t>(st.nodes[i].vertices.size());
    t.nodes[i].parent = st.nodes[i].parent;
    t.nodes[i].depth = st.nodes[i].level;
    if (st.nodes[i].parent >= 0) t.nodes[st.nodes[i].parent].children.push_back(i);
    if (st.nodes[i].parent < 0) t.root = static_cast<index_t>(i);
  }
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    index_t u = 0;
    for (index_t a = t.nodes[i].parent; a >= 0; a = t.nodes[a].parent) u += t.nodes[a].s;
    t.nodes[i].u = u;
  }
  return t;
}

/// Exact supernodal view from the symbolic factorization.
inline CommTree comm_tree_from_elimination(const EliminationStructure& es) {
  CommTree t;
  t.nodes.resize(static_cast<std::size_t>(es.n_supernodes()));
  index_t roots = 0;
  for (index_t s = 0; s < es.n_supernodes(); ++s) {
    t.nodes[s].s = es.snode_cols(s);
    t.nodes[s].u = static_cast<index_t>(es.snode_rows[s].size());
    t.nodes[s].parent = es.etree_parent[s];
    if (t.nodes[s].parent >= 0)
      t.nodes[t.nodes[s].parent].children.push_back(s);
    else {
      t.root = s;
      ++roots;
    }
  }
  if (roots != 1) t.root = -roots;  // forest marker; only pz = 1 can use it
  // depths
  std::vector<index_t> order;
  for (index_t s = es.n_supernodes() - 1; s >= 0; --s) order.push_back(s);
  for (index_t s : order)
    if (t.nodes[s].parent >= 0) t.nodes[s].depth = t.nodes[t.nodes[s].parent].depth + 1;
  return t;
}

/// Per-node layer assignment: {layer, 1} for subtree nodes, {lo, count > 1}
/// for replicated ancestors (reduction lands on layer lo, the lowest).
struct TreeMapping {
  struct NodeMap {
    index_t layer = 0;
    index_t count = 1;
  };
  std::vector<NodeMap> node;
  index_t pz = 1;

  bool replicated(index_t id) const { return node[id].count > 1; }
};

namespace detail {

inline double subtree_factor_weight(const CommTree& t, index_t id,
                                    std::vector<double>& memo) {
  if (memo[id] >= 0) return memo[id];
  const auto& nd = t.nodes[id];
  double w = static_cast<double>(nd.s) * static_cast<double>(nd.s + 2 * nd.u);
  for (index_t c : nd.children) w += subtree_factor_weight(t, c, memo);
  memo[id] = w;
  return w;
}

inline void map_subtree(const CommTree& t, TreeMapping& m, index_t id, index_t lo, index_t count,
                        std::vector<double>& weight);

// Sibling subtrees sharing a layer range: split the range in half and deal
// the subtrees onto the halves with proportional mapping (heaviest subtree
// first onto the lighter half), the binary-at-the-top etree transformation.
// Extra siblings sharing one layer simply become a forest there.
inline void map_children(const CommTree& t, TreeMapping& m, const std::vector<index_t>& kids,
                         index_t lo, index_t count, std::vector<double>& weight) {
  if (kids.size() == 1) {
    map_subtree(t, m, kids[0], lo, count, weight);
    return;
  }
  if (count == 1) {
    for (index_t k : kids) map_subtree(t, m, k, lo, 1, weight);
    return;
  }
  std::vector<index_t> order = kids;
  std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    if (weight[a] != weight[b]) return weight[a] > weight[b];
    return a < b;
  });
  std::vector<index_t> low_half, high_half;
  double wl = 0, wh = 0;
  for (index_t k : order) {
    if (wl <= wh) {
      low_half.push_back(k);
      wl += weight[k];
    } else {
      high_half.push_back(k);
      wh += weight[k];
    }
  }
  map_children(t, m, low_half, lo, count / 2, weight);
  map_children(t, m, high_half, lo + count / 2, count - count / 2, weight);
}

inline void map_subtree(const CommTree& t, TreeMapping& m, index_t id, index_t lo, index_t count,
                        std::vector<double>& weight) {
  m.node[id] = {lo, count};
  const auto& nd = t.nodes[id];
  if (count == 1) {
    for (index_t c : nd.children) map_subtree(t, m, c, lo, 1, weight);
    return;
  }
  if (nd.children.empty()) throw config_error("build_3d_mapping: tree too shallow for pz");
  map_children(t, m, nd.children, lo, count, weight);
}

}  // namespace detail

/// Halving scheme of the etree onto Pz layers: the top log2(Pz) levels are
/// replicated (a node at ancestor level l spans pz / 2^l layers, reductions
/// landing on the lowest), the Pz bottom subtrees map one per layer in
/// left-to-right order. Pz = 1 degenerates to everything on layer 0.
inline TreeMapping build_3d_mapping(const CommTree& tree, const ProcessGrid3D& grid) {
  grid.validate();
  TreeMapping m;
  m.pz = grid.pz;
  m.node.resize(tree.nodes.size());
  if (grid.pz == 1) {
    for (auto& nm : m.node) nm = {0, 1};
    return m;
  }
  if (tree.root < 0) throw config_error("build_3d_mapping: forest requires pz = 1");
  std::vector<double> weight(tree.nodes.size(), -1.0);
  detail::subtree_factor_weight(tree, tree.root, weight);
  detail::map_subtree(tree, m, tree.root, 0, grid.pz, weight);
  return m;
}

inline TreeMapping build_3d_mapping(const SeparatorTree& st, const ProcessGrid3D& grid) {
  return build_3d_mapping(comm_tree_from_separators(st), grid);
}

/// Per-process communication accounting under the alpha-beta model.
struct CommReport {
  struct PerProcess {
    double volume_scalars = 0;  // scalars sent
    double received_scalars = 0;
    double messages = 0;
    double memory_scalars = 0;
    double flops = 0;
  };
  std::vector<PerProcess> procs;
  double max_volume = 0, mean_volume = 0;
  double max_memory = 0, mean_memory = 0;
  double critical_seconds = 0;
  // inter-layer reduction phases: received message count per [stage][layer]
  std::vector<std::vector<double>> stage_layer_recv_msgs;

  void finalize() {
    for (const auto& p : procs) {
      max_volume = std::max(max_volume, p.volume_scalars);
      mean_volume += p.volume_scalars;
      max_memory = std::max(max_memory, p.memory_scalars);
      mean_memory += p.memory_scalars;
    }
    if (!procs.empty()) {
      mean_volume /= static_cast<double>(procs.size());
      mean_memory /= static_cast<double>(procs.size());
    }
  }

  double total_sent() const {
    double s = 0;
    for (const auto& p : procs) s += p.volume_scalars;
    return s;
  }
  double total_received() const {
    double s = 0;
    for (const auto& p : procs) s += p.received_scalars;
    return s;
  }
};

namespace detail {

struct GridIndexer {
  const ProcessGrid3D& g;
  index_t operator()(index_t x, index_t y, index_t z) const {
    return z * g.layer_procs() + y * g.px + x;
  }
};

/// Binomial reduction over the mapping's layer set of `id`: at stage t the
/// upper half of each 2^(t+1) group sends to the lower, landing everything
/// on the lowest layer. `scalars` is the payload per layer pair and hop.
inline void account_reduction(CommReport& rep, const ProcessGrid3D& grid,
                              const TreeMapping::NodeMap& nm, double scalars) {
  GridIndexer at{grid};
  const index_t hops = static_cast<index_t>(std::llround(std::log2(nm.count)));
  const double share = scalars / static_cast<double>(grid.layer_procs());
  for (index_t t = 0; t < hops; ++t) {
    const index_t step = index_t{1} << t;
    for (index_t off = 0; off < nm.count; off += 2 * step) {
      const index_t dst = nm.layer + off, src = nm.layer + off + step;
      if (static_cast<std::size_t>(t) >= rep.stage_layer_recv_msgs.size())
        rep.stage_layer_recv_msgs.resize(t + 1,
                                         std::vector<double>(grid.pz, 0.0));
      rep.stage_layer_recv_msgs[t][dst] += 1.0;
      for (index_t y = 0; y < grid.py; ++y)
        for (index_t x = 0; x < grid.px; ++x) {
          auto& sp = rep.procs[at(x, y, src)];
          auto& dp = rep.procs[at(x, y, dst)];
          sp.volume_scalars += share;
          sp.messages += 1.0;
          dp.received_scalars += share;
        }
    }
  }
}

/// Intra-layer 2D panel broadcast model: block-cyclic panels travel along
/// process rows and columns, so each process receives (and forwards) a
/// 1/px + 1/py share of the panel; on a sqrt(p) x sqrt(p) grid this is the
/// classical panel/sqrt(p) volume per process.
inline void account_2d_broadcast(CommReport& rep, const ProcessGrid3D& grid, index_t layer,
                                 double panel_scalars) {
  GridIndexer at{grid};
  const double row_col = static_cast<double>(grid.px - 1 + grid.py - 1);
  if (row_col == 0.0) return;
  const double share =
      0.5 * panel_scalars * (1.0 / static_cast<double>(grid.px) + 1.0 / static_cast<double>(grid.py));
  for (index_t y = 0; y < grid.py; ++y)
    for (index_t x = 0; x < grid.px; ++x) {
      auto& p = rep.procs[at(x, y, layer)];
      p.volume_scalars += share;
      p.received_scalars += share;
      p.messages += row_col;
    }
}

}  // namespace detail

/// SpLU communication: per-node 2D panel broadcasts inside the owning
/// layer, binomial inter-layer reductions of the replicated ancestors'
/// partial Schur fronts, replicated-front memory per layer in the set.
inline CommReport simulate_splu_comm(const TreeMapping& mapping, const CommTree& tree,
                                     const ProcessGrid3D& grid, const MachineModel& model) {
  grid.validate();
  CommReport rep;
  rep.procs.resize(static_cast<std::size_t>(grid.total()));
  detail::GridIndexer at{grid};
  const double layer_procs = static_cast<double>(grid.layer_procs());
  for (index_t id = 0; id < tree.size(); ++id) {
    const auto& nd = tree.nodes[id];
    const auto& nm = mapping.node[id];
    const double s = static_cast<double>(nd.s), u = static_cast<double>(nd.u);
    const double front = (s + u) * (s + u);
    const double factor_entries = s * s + 2.0 * s * u;
    const double factor_flops = 2.0 / 3.0 * s * s * s + 2.0 * s * s * u + 2.0 * s * u * u;
    // 2D factorization on the landing layer
    detail::account_2d_broadcast(rep, grid, nm.layer, factor_entries);
    for (index_t y = 0; y < grid.py; ++y)
      for (index_t x = 0; x < grid.px; ++x) {
        auto& p = rep.procs[at(x, y, nm.layer)];
        p.memory_scalars += factor_entries / layer_procs;
        p.flops += factor_flops / layer_procs;
      }
    if (mapping.replicated(id)) {
      // replicated partial-Schur memory on every layer of the set
      for (index_t z = nm.layer; z < nm.layer + nm.count; ++z)
        for (index_t y = 0; y < grid.py; ++y)
          for (index_t x = 0; x < grid.px; ++x)
            rep.procs[at(x, y, z)].memory_scalars += front / layer_procs;
      detail::account_reduction(rep, grid, nm, front);
    }
  }
  // Critical path: leaf-to-root chain cost, communication and computation add.
  std::vector<double> chain(tree.nodes.size(), 0.0);
  double best = 0.0;
  for (index_t id = 0; id < tree.size(); ++id) chain[id] = -1.0;
  // process in depth order (children before parents have larger depth)
  std::vector<index_t> order(tree.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<index_t>(i);
  std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    return tree.nodes[a].depth > tree.nodes[b].depth;
  });
  for (index_t id : order) {
    const auto& nd = tree.nodes[id];
    const auto& nm = mapping.node[id];
    const double s = static_cast<double>(nd.s), u = static_cast<double>(nd.u);
    const double factor_flops = 2.0 / 3.0 * s * s * s + 2.0 * s * s * u + 2.0 * s * u * u;
    const double bcast = (grid.px - 1 + grid.py - 1) > 0
                             ? model.alpha * static_cast<double>(grid.px - 1 + grid.py - 1) +
                                   model.beta * (s * s + 2 * s * u) / layer_procs
                             : 0.0;
    double c = model.gamma * factor_flops / layer_procs + bcast;
    if (mapping.replicated(id)) {
      const double hops = std::log2(static_cast<double>(nm.count));
      c += hops * (model.alpha + model.beta * (s + u) * (s + u) / layer_procs);
    }
    double childmax = 0.0;
    for (index_t ch : nd.children) childmax = std::max(childmax, chain[ch]);
    chain[id] = c + childmax;
    best = std::max(best, chain[id]);
  }
  rep.critical_seconds = best;
  rep.finalize();
  return rep;
}

/// SpTRSV communication: solution-piece broadcasts inside layers, one
/// RHS-partial-sum reduction per replicated ancestor (|I^s| scalars per
/// hop), solve flops proportional to the factor panels.
inline CommReport simulate_sptrsv_comm(const TreeMapping& mapping, const CommTree& tree,
                                       const ProcessGrid3D& grid, const MachineModel& model) {
  grid.validate();
  CommReport rep;
  rep.procs.resize(static_cast<std::size_t>(grid.total()));
  detail::GridIndexer at{grid};
  const double layer_procs = static_cast<double>(grid.layer_procs());
  for (index_t id = 0; id < tree.size(); ++id) {
    const auto& nd = tree.nodes[id];
    const auto& nm = mapping.node[id];
    const double s = static_cast<double>(nd.s), u = static_cast<double>(nd.u);
    detail::account_2d_broadcast(rep, grid, nm.layer, s);
    for (index_t y = 0; y < grid.py; ++y)
      for (index_t x = 0; x < grid.px; ++x) {
        auto& p = rep.procs[at(x, y, nm.layer)];
        p.flops += (2.0 * s * s + 4.0 * s * u) / layer_procs;
        p.memory_scalars += s / layer_procs;
      }
    if (mapping.replicated(id)) {
      for (index_t z = nm.layer; z < nm.layer + nm.count; ++z)
        for (index_t y = 0; y < grid.py; ++y)
          for (index_t x = 0; x < grid.px; ++x)
            rep.procs[at(x, y, z)].memory_scalars += s / layer_procs;
      detail::account_reduction(rep, grid, nm, s);
    }
  }
  std::vector<double> chain(tree.nodes.size(), 0.0);
  std::vector<index_t> order(tree.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<index_t>(i);
  std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    return tree.nodes[a].depth > tree.nodes[b].depth;
  });
  double best = 0.0;
  for (index_t id : order) {
    const auto& nd = tree.nodes[id];
    const auto& nm = mapping.node[id];
    const double s = static_cast<double>(nd.s), u = static_cast<double>(nd.u);
    double c = model.gamma * (2.0 * s * s + 4.0 * s * u) / layer_procs;
    if (grid.px - 1 + grid.py - 1 > 0)
      c += model.alpha * static_cast<double>(grid.px - 1 + grid.py - 1) +
           model.beta * s / layer_procs;
    if (mapping.replicated(id))
      c += std::log2(static_cast<double>(nm.count)) *
           (model.alpha + model.beta * s / layer_procs);
    double childmax = 0.0;
    for (index_t ch : nd.children) childmax = std::max(childmax, chain[ch]);
    chain[id] = c + childmax;
    best = std::max(best, chain[id]);
  }
  rep.critical_seconds = best;
  rep.finalize();
  return rep;
}

enum class ProblemClass { planar, nonplanar };

/// Closed-form asymptotic costs with unit constants (notional magnitudes).
/// All logarithms are base 2. The planar lower bound W_lb = F / sqrt(M)
/// reduces to n / (sqrt(P) sqrt(log n)).
struct AsymptoticCosts {
  double W2d = 0, W3d = 0;  // SpLU communication volume per process
  double M2d = 0, M3d = 0;  // memory per process
  double L2d = 0, L3d = 0;  // latency
  double F = 0;             // flops per process
  double sptrsv_cost_2d = 0, sptrsv_cost_3d = 0;
  double sptrsv_avg_vol_2d = 0, sptrsv_avg_vol_3d = 0;
  double sptrsv_max_vol_2d = 0, sptrsv_max_vol_3d = 0;
  double lower_bound_W = 0, lower_bound_S = 0;
};

inline AsymptoticCosts eval_asymptotics(ProblemClass problem, double n, double P, double pz) {
  if (n < 1 || P < 1 || pz < 1) throw config_error("eval_asymptotics: sizes must be >= 1");
  AsymptoticCosts c;
  const double lg = std::log2(n);
  const double lgpz = std::log2(pz);
  if (problem == ProblemClass::planar) {
    c.F = std::pow(n, 1.5) / P;
    c.W2d = n / std::sqrt(P) * lg;
    c.W3d = n / std::sqrt(P) * (2.0 * std::sqrt(pz) + lg / std::sqrt(pz)) +
            2.0 * n * pz * lgpz / P;
    c.M2d = n / P * lg;
    c.M3d = n / P * (std::log2(n / pz) + pz);
    c.L2d = n;
    c.L3d = n / pz + std::sqrt(n);
    c.sptrsv_cost_2d = n / std::sqrt(P) + std::sqrt(n);
    c.sptrsv_cost_3d = n / std::sqrt(pz * P) + std::sqrt(n);
    c.sptrsv_avg_vol_2d = n / std::sqrt(P);
    c.sptrsv_avg_vol_3d = n / std::sqrt(pz * P);
    c.sptrsv_max_vol_2d = n / std::sqrt(P);
    c.sptrsv_max_vol_3d = n / std::sqrt(pz * P) + std::sqrt(n * pz) / std::sqrt(P);
  } else {
    const double a = std::pow(2.0, 1.0 / 3.0);
    const double k1 = 2.0 * (a - 1.0) / (std::pow(a, 4.0) - 1.0);
    const double k2 = a / (a + 1.0);
    c.F = n * n / P;
    c.W2d = std::pow(n, 4.0 / 3.0) / std::sqrt(P);
    c.W3d = c.W2d * (k1 * std::sqrt(pz) + (1.0 - k1) / std::pow(pz, 5.0 / 6.0)) +
            c.W2d * (k1 * pz * lgpz / std::sqrt(P));
    c.M2d = std::pow(n, 4.0 / 3.0) / P;
    c.M3d = c.M2d * (pz + std::pow(pz, -4.0 / 3.0));
    c.L2d = n;
    c.L3d = c.L2d * (k2 * std::pow(n, -1.0 / 3.0) + 1.0 / pz);
    c.sptrsv_cost_2d = n / std::sqrt(P) + std::pow(n, 2.0 / 3.0);
    c.sptrsv_cost_3d = n / std::sqrt(pz * P) + std::pow(n, 2.0 / 3.0);
    c.sptrsv_avg_vol_2d = n / std::sqrt(P);
    c.sptrsv_avg_vol_3d = n / std::sqrt(pz * P);
    c.sptrsv_max_vol_2d = n / std::sqrt(P);
    c.sptrsv_max_vol_3d =
        n / std::sqrt(pz * P) + std::pow(n, 2.0 / 3.0) * std::sqrt(pz) / std::sqrt(P);
  }
  const double M = problem == ProblemClass::planar ? n * lg / P : std::pow(n, 4.0 / 3.0) / P;
  c.lower_bound_W = c.F / std::sqrt(M);
  c.lower_bound_S = c.F / std::pow(M, 1.5);
  return c;
}

/// Squarish 2D factorization of the per-layer process count.
inline std::pair<index_t, index_t> square_layer_grid(index_t layer_procs) {
  index_t px = static_cast<index_t>(std::sqrt(static_cast<double>(layer_procs)));
  while (px > 1 && layer_procs % px != 0) --px;
  return {px, layer_procs / px};
}

/// P_z sweep rows in the fixed schema
/// "pz,W3d_formula,W2d_formula,W3d_measured,M3d,latency3d". When a measured
/// tree is supplied, W3d_measured is the simulator's max per-process volume
/// on a squarish (P/pz) x pz grid; otherwise the column is left empty.
inline std::string sweep_pz(ProblemClass problem, double n, double P,
                            const std::vector<index_t>& pz_list,
                            const CommTree* measured = nullptr,
                            const MachineModel& model = MachineModel{}) {
  std::ostringstream os;
  os << "pz,W3d_formula,W2d_formula,W3d_measured,M3d,latency3d\n";
  for (index_t pz : pz_list) {
    if (!ProcessGrid3D::power_of_two(pz)) throw config_error("sweep_pz: pz must be a power of two");
    auto c = eval_asymptotics(problem, n, P, static_cast<double>(pz));
    os << pz << "," << c.W3d << "," << c.W2d << ",";
    if (measured && static_cast<double>(pz) <= P &&
        static_cast<index_t>(P) % pz == 0) {
      auto [px, py] = square_layer_grid(static_cast<index_t>(P) / pz);
      ProcessGrid3D grid{px, py, pz};
      auto mapping = build_3d_mapping(*measured, grid);
      auto rep = simulate_splu_comm(mapping, *measured, grid, model);
      os << rep.max_volume;
    }
    os << "," << c.M3d << "," << c.L3d << "\n";
  }
  return os.str();
}

}  // namespace rsmf

#endif
