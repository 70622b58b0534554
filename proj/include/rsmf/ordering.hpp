#ifndef RSMF_ORDERING_HPP
#define RSMF_ORDERING_HPP

#include <algorithm>
#include <queue>
#include <vector>

#include "rsmf/sparse.hpp"

namespace rsmf {

/// Binary separator tree: internal nodes own their separator vertices,
/// leaves own a remaining region. The vertex sets of all nodes partition
/// [0, n). Root is node 0, at level 0.
struct SeparatorTree {
  struct Node {
    std::vector<index_t> vertices;  // separator (internal) or region (leaf)
    index_t parent = -1;
    index_t child0 = -1;
    index_t child1 = -1;
    int level = 0;
  };
  std::vector<Node> nodes;

  bool is_leaf(index_t id) const { return nodes[id].child0 < 0; }

  int depth() const {
    int d = 0;
    for (const auto& nd : nodes) d = std::max(d, nd.level + 1);
    return d;
  }
};

struct NestedDissection {
  std::vector<index_t> p_col;  // p_col[new] = old
  SeparatorTree tree;
};

namespace detail {

struct NdSplit {
  std::vector<index_t> sep, left, right;
};

struct NdBuilder {
  const std::vector<std::vector<index_t>>& adj;
  const std::vector<std::vector<double>>* coords;
  index_t leaf_cutoff;
  SeparatorTree tree;
  std::vector<index_t> order;

  // Vertex separator from a (low, high) 2-coloring: low vertices touching
  // high form the separator; if that empties the low side, carve from the
  // high side instead. Removal disconnects left from right by construction.
  NdSplit carve(const std::vector<index_t>& low, const std::vector<index_t>& high) {
    std::vector<char> side(adj.size(), 0);
    for (auto v : low) side[v] = 1;
    for (auto v : high) side[v] = 2;
    NdSplit s;
    std::vector<char> in_sep(adj.size(), 0);
    for (auto v : high)
      for (auto w : adj[v])
        if (side[w] == 1 && !in_sep[w]) {
          in_sep[w] = 1;
          s.sep.push_back(w);
        }
    for (auto v : low)
      if (!in_sep[v]) s.left.push_back(v);
    s.right = high;
    if (s.left.empty()) {
      s = NdSplit{};
      std::vector<char> in_sep2(adj.size(), 0);
      for (auto v : low)
        for (auto w : adj[v])
          if (side[w] == 2 && !in_sep2[w]) {
            in_sep2[w] = 1;
            s.sep.push_back(w);
          }
      s.left = low;
      for (auto v : high)
        if (!in_sep2[v]) s.right.push_back(v);
    }
    std::sort(s.sep.begin(), s.sep.end());
    std::sort(s.left.begin(), s.left.end());
    std::sort(s.right.begin(), s.right.end());
    return s;
  }

  // Greedy BFS-grown bisection from the smallest vertex; low gets exactly
  // floor(n/2) vertices, so both children end at <= ceil(n/2).
  NdSplit bisect_graph(const std::vector<index_t>& region) {
    std::vector<char> in_region(adj.size(), 0), taken(adj.size(), 0);
    for (auto v : region) in_region[v] = 1;
    std::vector<index_t> low, high;
    const index_t half = static_cast<index_t>(region.size()) / 2;
    std::priority_queue<index_t, std::vector<index_t>, std::greater<index_t>> frontier;
    std::size_t seed_scan = 0;
    while (static_cast<index_t>(low.size()) < half) {
      if (frontier.empty()) {
        while (taken[region[seed_scan]]) ++seed_scan;
        frontier.push(region[seed_scan]);
        taken[region[seed_scan]] = 1;
      }
      const index_t v = frontier.top();
      frontier.pop();
      low.push_back(v);
      for (auto w : adj[v])
        if (in_region[w] && !taken[w]) {
          taken[w] = 1;
          frontier.push(w);
        }
    }
    std::vector<char> in_low(adj.size(), 0);
    for (auto v : low) in_low[v] = 1;
    for (auto v : region)
      if (!in_low[v]) high.push_back(v);
    return carve(low, high);
  }

  // Median cut along the widest coordinate axis, median layer to the low
  // half. Degenerate or unbalanced outcomes fall back to the graph split.
  NdSplit bisect(const std::vector<index_t>& region) {
    const index_t n = static_cast<index_t>(region.size());
    if (coords) {
      const std::size_t dim = (*coords)[region[0]].size();
      std::size_t axis = 0;
      double widest = -1.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double lo = (*coords)[region[0]][d], hi = lo;
        for (auto v : region) {
          lo = std::min(lo, (*coords)[v][d]);
          hi = std::max(hi, (*coords)[v][d]);
        }
        if (hi - lo > widest) {
          widest = hi - lo;
          axis = d;
        }
      }
      std::vector<double> sorted;
      sorted.reserve(region.size());
      for (auto v : region) sorted.push_back((*coords)[v][axis]);
      std::nth_element(sorted.begin(), sorted.begin() + (n - 1) / 2, sorted.end());
      const double median = sorted[(n - 1) / 2];
      std::vector<index_t> low, high;
      for (auto v : region) ((*coords)[v][axis] <= median ? low : high).push_back(v);
      if (!low.empty() && !high.empty()) {
        NdSplit s = carve(low, high);
        const index_t bound = (n + 1) / 2;
        if (!s.left.empty() && !s.right.empty() &&
            static_cast<index_t>(std::max(s.left.size(), s.right.size())) <= bound)
          return s;
      }
    }
    return bisect_graph(region);
  }

  index_t build(std::vector<index_t> region, int level) {
    const index_t id = static_cast<index_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].level = level;
    std::sort(region.begin(), region.end());
    if (static_cast<index_t>(region.size()) <= leaf_cutoff) {
      for (auto v : region) order.push_back(v);
      tree.nodes[id].vertices = std::move(region);
      return id;
    }
    NdSplit s = bisect(region);
    if (s.left.empty() || s.right.empty()) {  // unsplittable (e.g. a clique)
      for (auto v : region) order.push_back(v);
      tree.nodes[id].vertices = std::move(region);
      return id;
    }
    const index_t c0 = build(std::move(s.left), level + 1);
    const index_t c1 = build(std::move(s.right), level + 1);
    tree.nodes[c0].parent = id;
    tree.nodes[c1].parent = id;
    tree.nodes[id].child0 = c0;
    tree.nodes[id].child1 = c1;
    for (auto v : s.sep) order.push_back(v);  // separator after both regions
    tree.nodes[id].vertices = std::move(s.sep);
    return id;
  }
};

}  // namespace detail

/// Nested dissection of the symmetrized pattern of A. With coordinates the
/// bisection cuts the widest axis at the median; otherwise a BFS-grown graph
/// bisection is used. The permutation orders each separator after both of
/// its regions. p_col[new] = old.
inline NestedDissection nested_dissection(const SparseMatrix& A,
                                          const std::vector<std::vector<double>>* coords = nullptr,
                                          index_t leaf_cutoff = 64) {
  auto adj = symmetrized_adjacency(A);
  detail::NdBuilder b{adj, coords, std::max<index_t>(1, leaf_cutoff), {}, {}};
  std::vector<index_t> all(static_cast<std::size_t>(A.n_cols));
  for (index_t i = 0; i < A.n_cols; ++i) all[i] = i;
  b.build(std::move(all), 0);
  NestedDissection nd;
  nd.p_col = std::move(b.order);
  nd.tree = std::move(b.tree);
  return nd;
}

}  // namespace rsmf

#endif
