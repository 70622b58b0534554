#ifndef RSMF_ASSEMBLY_HPP
#define RSMF_ASSEMBLY_HPP

#include <algorithm>
#include <vector>

#include "rsmf/symbolic.hpp"

namespace rsmf {

/// Assembly tree: one node per supernode with its fully-summed columns I^s
/// and update rows I^u (sorted global indices in the permuted order).
/// Node ids are topological: every parent id is larger than its children's.
struct AssemblyTree {
  struct Node {
    index_t begin = 0, end = 0;  // I^s = [begin, end)
    std::vector<index_t> update;  // I^u
    index_t parent = -1;
    std::vector<index_t> children;

    index_t n_fully_summed() const { return end - begin; }
    index_t n_update() const { return static_cast<index_t>(update.size()); }
    index_t front_size() const { return n_fully_summed() + n_update(); }
  };
  std::vector<Node> nodes;
  index_t n = 0;

  index_t size() const { return static_cast<index_t>(nodes.size()); }
};

inline AssemblyTree build_assembly_tree(const EliminationStructure& es) {
  AssemblyTree t;
  t.n = es.n;
  t.nodes.resize(static_cast<std::size_t>(es.n_supernodes()));
  for (index_t s = 0; s < es.n_supernodes(); ++s) {
    auto& nd = t.nodes[s];
    nd.begin = es.snode_begin[s];
    nd.end = es.snode_begin[s + 1];
    nd.update = es.snode_rows[s];
    nd.parent = es.etree_parent[s];
    if (nd.parent >= 0) t.nodes[nd.parent].children.push_back(s);
  }
  return t;
}

/// Pure ready-set iterator over the assembly tree: a node is ready when all
/// of its children have completed. A sequential engine drains it in id
/// order; a caller-provided scheduler may run disjoint subtrees concurrently.
class AssemblySchedule {
public:
  explicit AssemblySchedule(const AssemblyTree& tree) : tree_(&tree) {
    pending_children_.resize(tree.nodes.size());
    state_.assign(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
      pending_children_[i] = static_cast<index_t>(tree.nodes[i].children.size());
    remaining_ = static_cast<index_t>(tree.nodes.size());
  }

  std::vector<index_t> ready() const {
    std::vector<index_t> r;
    for (std::size_t i = 0; i < state_.size(); ++i)
      if (state_[i] == 0 && pending_children_[i] == 0) r.push_back(static_cast<index_t>(i));
    return r;
  }

  void complete(index_t node) {
    if (state_[node] != 0 || pending_children_[node] != 0)
      throw structural_error("AssemblySchedule: node completed out of order");
    state_[node] = 1;
    --remaining_;
    const index_t p = tree_->nodes[node].parent;
    if (p >= 0) --pending_children_[p];
  }

  bool done() const { return remaining_ == 0; }

private:
  const AssemblyTree* tree_;
  std::vector<index_t> pending_children_;
  std::vector<char> state_;
  index_t remaining_ = 0;
};

}  // namespace rsmf

#endif
