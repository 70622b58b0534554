#ifndef RSMF_CLUSTER_HPP
#define RSMF_CLUSTER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rsmf/core.hpp"

namespace rsmf {

/// Binary cluster tree over a reordered index range. Geometric trees carry
/// bounding boxes; algebraic trees split index ranges at the midpoint and
/// use index extent as the diameter surrogate.
struct ClusterTree {
  struct Node {
    index_t begin = 0, end = 0;  // range in clustered order
    index_t child0 = -1, child1 = -1;
    int level = 0;
    std::vector<double> box_lo, box_hi;  // empty for algebraic trees

    index_t size() const { return end - begin; }
  };
  std::vector<Node> nodes;
  std::vector<index_t> perm;  // perm[clustered] = original index
  index_t leaf_size = 0;

  index_t n() const { return static_cast<index_t>(perm.size()); }
  bool is_leaf(index_t id) const { return nodes[id].child0 < 0; }

  int depth() const {
    int d = 0;
    for (const auto& nd : nodes) d = std::max(d, nd.level + 1);
    return d;
  }
};

namespace detail {

inline index_t build_cluster_rec(ClusterTree& tree,
                                 const std::vector<std::vector<double>>* points,
                                 std::vector<index_t>& order, index_t begin, index_t end,
                                 int level) {
  const index_t id = static_cast<index_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[id].begin = begin;
  tree.nodes[id].end = end;
  tree.nodes[id].level = level;
  if (points) {
    const std::size_t dim = (*points)[order[begin]].size();
    auto& lo = tree.nodes[id].box_lo;
    auto& hi = tree.nodes[id].box_hi;
    lo.assign(dim, 0.0);
    hi.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
      lo[d] = hi[d] = (*points)[order[begin]][d];
      for (index_t i = begin; i < end; ++i) {
        lo[d] = std::min(lo[d], (*points)[order[i]][d]);
        hi[d] = std::max(hi[d], (*points)[order[i]][d]);
      }
    }
  }
  if (end - begin <= tree.leaf_size) return id;
  index_t mid;
  if (points) {
    // Median split on the widest axis; ties (and the extra element of odd
    // ranges) go to the lower half.
    const auto& lo = tree.nodes[id].box_lo;
    const auto& hi = tree.nodes[id].box_hi;
    std::size_t axis = 0;
    for (std::size_t d = 1; d < lo.size(); ++d)
      if (hi[d] - lo[d] > hi[axis] - lo[axis]) axis = d;
    mid = begin + (end - begin + 1) / 2;
    std::stable_sort(order.begin() + begin, order.begin() + end,
                     [&](index_t a, index_t b) {
                       if ((*points)[a][axis] != (*points)[b][axis])
                         return (*points)[a][axis] < (*points)[b][axis];
                       return a < b;
                     });
  } else {
    mid = begin + (end - begin + 1) / 2;
  }
  const index_t c0 = build_cluster_rec(tree, points, order, begin, mid, level + 1);
  const index_t c1 = build_cluster_rec(tree, points, order, mid, end, level + 1);
  tree.nodes[id].child0 = c0;
  tree.nodes[id].child1 = c1;
  return id;
}

}  // namespace detail

/// Geometric mode: KD-style tree splitting the widest axis at the median.
inline ClusterTree build_cluster_tree(const std::vector<std::vector<double>>& points,
                                      index_t leaf_size) {
  if (leaf_size < 1) throw config_error("build_cluster_tree: leaf_size must be positive");
  ClusterTree tree;
  tree.leaf_size = leaf_size;
  tree.perm.resize(points.size());
  std::iota(tree.perm.begin(), tree.perm.end(), 0);
  if (points.empty()) return tree;
  detail::build_cluster_rec(tree, &points, tree.perm, 0, static_cast<index_t>(points.size()), 0);
  return tree;
}

/// Algebraic mode: midpoint splits of the index range, identity permutation.
inline ClusterTree build_cluster_tree(index_t count, index_t leaf_size) {
  if (leaf_size < 1) throw config_error("build_cluster_tree: leaf_size must be positive");
  ClusterTree tree;
  tree.leaf_size = leaf_size;
  tree.perm.resize(static_cast<std::size_t>(count));
  std::iota(tree.perm.begin(), tree.perm.end(), 0);
  if (count == 0) return tree;
  detail::build_cluster_rec(tree, nullptr, tree.perm, 0, count, 0);
  return tree;
}

struct AdmissibilityParams {
  double eta = 0.7;
  enum class Mode { weak, strong } mode = Mode::weak;
};

inline double cluster_diameter(const ClusterTree& tree, index_t id) {
  const auto& nd = tree.nodes[id];
  if (nd.box_lo.empty()) return static_cast<double>(nd.size() - 1);  // index diameter
  double d2 = 0;
  for (std::size_t k = 0; k < nd.box_lo.size(); ++k) {
    const double e = nd.box_hi[k] - nd.box_lo[k];
    d2 += e * e;
  }
  return std::sqrt(d2);
}

inline double cluster_distance(const ClusterTree& tree, index_t s, index_t t) {
  const auto& a = tree.nodes[s];
  const auto& b = tree.nodes[t];
  if (a.box_lo.empty()) {  // index gap
    if (a.end <= b.begin) return static_cast<double>(b.begin - a.end);
    if (b.end <= a.begin) return static_cast<double>(a.begin - b.end);
    return 0.0;
  }
  double d2 = 0;
  for (std::size_t k = 0; k < a.box_lo.size(); ++k) {
    const double gap = std::max({0.0, a.box_lo[k] - b.box_hi[k], b.box_lo[k] - a.box_hi[k]});
    d2 += gap * gap;
  }
  return std::sqrt(d2);
}

/// Strong mode: (Diam(s) + Diam(t)) / 2 <= eta * Dist(s, t).
/// Weak mode: any distinct pair (sibling off-diagonal blocks).
inline bool admissible(const ClusterTree& tree, index_t s, index_t t,
                       const AdmissibilityParams& params) {
  if (s == t) return false;
  if (params.mode == AdmissibilityParams::Mode::weak) return true;
  const double diam = 0.5 * (cluster_diameter(tree, s) + cluster_diameter(tree, t));
  return diam <= params.eta * cluster_distance(tree, s, t);
}

/// Kernel matrix generators: gaussian exp(-|x-y|^2 / (2 sigma^2)) and the 3D
/// Laplace Green's function 1/(4 pi |x-y|) with diagonal 2/(4 pi h), h the
/// minimum inter-point distance.
struct KernelSpec {
  enum class Kind { gaussian, laplace3d } kind = Kind::gaussian;
  std::vector<std::vector<double>> points;
  double sigma = 1.0;
  double min_distance = 0.0;  // computed for laplace3d

  static KernelSpec gaussian(std::vector<std::vector<double>> pts, double sigma) {
    KernelSpec s;
    s.kind = Kind::gaussian;
    s.points = std::move(pts);
    s.sigma = sigma;
    return s;
  }

  static KernelSpec laplace3d(std::vector<std::vector<double>> pts) {
    KernelSpec s;
    s.kind = Kind::laplace3d;
    s.points = std::move(pts);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.points.size(); ++i)
      for (std::size_t j = i + 1; j < s.points.size(); ++j) {
        double d2 = 0;
        for (std::size_t k = 0; k < s.points[i].size(); ++k) {
          const double d = s.points[i][k] - s.points[j][k];
          d2 += d * d;
        }
        best = std::min(best, d2);
      }
    s.min_distance = s.points.size() < 2 ? 1.0 : std::sqrt(best);
    return s;
  }
};

inline double kernel_entry(const KernelSpec& spec, index_t i, index_t j) {
  const auto& x = spec.points[i];
  const auto& y = spec.points[j];
  double d2 = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    d2 += d * d;
  }
  if (spec.kind == KernelSpec::Kind::gaussian)
    return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
  if (i == j) return 2.0 / (4.0 * M_PI * spec.min_distance);
  return 1.0 / (4.0 * M_PI * std::sqrt(d2));
}

}  // namespace rsmf

#endif
