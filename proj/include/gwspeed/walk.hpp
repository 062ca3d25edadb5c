#pragma once

// The biased walk kernel and trajectory bookkeeping.
//
// All walks run over a "surface": an id-indexed view of a tree (or double
// tree) exposing the kernel step, the structural parent (for edge-crossing
// counters) and depths. Ids are dense, so per-node bookkeeping is flat
// arrays. The walk moves to the parent with weight lambda and to each child
// with weight 1, and is reflected at the artificial parent of the root.

#include <cstdint>
#include <string>
#include <vector>

#include "gwspeed/common.hpp"
#include "gwspeed/offspring.hpp"
#include "gwspeed/tree.hpp"

namespace gws {

// ============================================================================
// Surfaces
// ============================================================================

class ArenaSurface {
 public:
  explicit ArenaSurface(TreeArena& arena) : arena_(&arena) {}

  uint32_t root_parent_id() const { return TreeArena::kRootParent; }
  uint32_t parent(uint32_t id) const {
    return id == TreeArena::kRootParent ? kNoNode : arena_->parent(id);
  }
  int depth(uint32_t id) const { return arena_->depth(id); }
  uint32_t child_count(uint32_t id) const { return arena_->child_count(id); }
  uint32_t step(uint32_t cur, double lambda, Rng& rng) const;
  size_t size() const { return arena_->node_count(); }
  Word word(uint32_t id) const { return arena_->word(id); }

 private:
  TreeArena* arena_;
};

// Finite explicit tree with e* attached; id 0 is e*, id i+1 the i-th word.
class ExplicitSurface {
 public:
  explicit ExplicitSurface(const ExplicitTree& tree);

  uint32_t root_parent_id() const { return 0; }
  uint32_t id_of(const Site& s) const;
  Site site_of(uint32_t id) const;
  uint32_t parent(uint32_t id) const { return parent_[id]; }
  int depth(uint32_t id) const { return depth_[id]; }
  uint32_t child_count(uint32_t id) const { return nchild_[id]; }
  uint32_t child(uint32_t id, uint32_t letter) const;
  uint32_t step(uint32_t cur, double lambda, Rng& rng) const;
  // Kernel probability of the move from -> to; 0 if not adjacent.
  double step_prob(uint32_t from, uint32_t to, double lambda) const;
  size_t size() const { return parent_.size(); }

 private:
  const ExplicitTree* tree_;
  std::vector<uint32_t> parent_;
  std::vector<int> depth_;
  std::vector<uint32_t> nchild_;
  std::vector<std::vector<uint32_t>> children_;
};

// Shared id layout of a double tree: right-tree words first (the root e+ is
// id 0), then left-tree words (e- is id right_size).
class DoubleLayout {
 public:
  explicit DoubleLayout(const DoubleTree& dt);

  const DoubleTree& tree() const { return *dt_; }
  uint32_t id_of(const DVert& v) const;
  DVert vert_of(uint32_t id) const;
  uint32_t eplus() const { return 0; }
  uint32_t eminus() const { return static_cast<uint32_t>(nright_); }
  bool is_right(uint32_t id) const { return id < nright_; }

  // Structural parent with the double tree rooted at e+ (e- is a child of
  // e+); kNoNode at e+.
  uint32_t parent(uint32_t id) const { return parent_[id]; }
  uint32_t child_count(uint32_t id) const { return nchild_[id]; }
  const std::vector<uint32_t>& children(uint32_t id) const { return children_[id]; }
  int depth(uint32_t id) const { return depth_[id]; }  // distance from e+
  size_t size() const { return parent_.size(); }

 private:
  const DoubleTree* dt_;
  size_t nright_;
  std::vector<uint32_t> parent_;
  std::vector<uint32_t> nchild_;
  std::vector<std::vector<uint32_t>> children_;
  std::vector<int> depth_;
};

// The two-sided walk: inside each tree the usual kernel, with the two roots
// acting as each other's parent.
class DoubleSurfaceY {
 public:
  explicit DoubleSurfaceY(const DoubleLayout& layout) : l_(&layout) {}

  uint32_t parent(uint32_t id) const { return l_->parent(id); }
  int depth(uint32_t id) const { return l_->depth(id); }
  uint32_t child_count(uint32_t id) const { return l_->child_count(id); }
  uint32_t step(uint32_t cur, double lambda, Rng& rng) const;
  double step_prob(uint32_t from, uint32_t to, double lambda) const;
  size_t size() const { return l_->size(); }
  const DoubleLayout& layout() const { return *l_; }

 private:
  // Where the weight-lambda move goes: the other root when at a root.
  uint32_t kernel_up(uint32_t id) const;
  const DoubleLayout* l_;
};

// The walk on the double tree hung at a left-tree vertex r: weight lambda
// toward the r-parent, weight 1 to the other neighbours, reflected at r-,
// never entering the strict descendants of r on the left side.
class DoubleSurfaceYr {
 public:
  DoubleSurfaceYr(const DoubleLayout& layout, Word r);

  uint32_t parent(uint32_t id) const { return l_->parent(id); }
  int depth(uint32_t id) const { return l_->depth(id); }
  uint32_t child_count(uint32_t id) const { return l_->child_count(id); }
  uint32_t step(uint32_t cur, double lambda, Rng& rng) const;
  double step_prob(uint32_t from, uint32_t to, double lambda) const;
  size_t size() const { return l_->size(); }
  bool allowed(uint32_t id) const { return allowed_[id]; }
  uint32_t reflect_id() const { return reflect_; }

 private:
  const DoubleLayout* l_;
  Word r_;
  uint32_t reflect_ = kNoNode;             // r-
  std::vector<uint8_t> allowed_;           // excludes {u-, u > r}
  std::vector<uint32_t> rparent_;          // kNoNode where undefined
  std::vector<std::vector<uint32_t>> others_;  // allowed neighbours minus r-parent
};

// ============================================================================
// Trajectories
// ============================================================================

struct Trajectory {
  std::vector<uint32_t> nodes;
  double lambda = 1.0;
  // Directed crossing counters, keyed by the child endpoint of each edge.
  std::vector<uint32_t> up_cross;    // child -> parent moves
  std::vector<uint32_t> down_cross;  // parent -> child moves

  size_t steps() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  uint32_t up_count(uint32_t child_id) const {
    return child_id < up_cross.size() ? up_cross[child_id] : 0;
  }
  uint32_t down_count(uint32_t child_id) const {
    return child_id < down_cross.size() ? down_cross[child_id] : 0;
  }
};

template <class Surface>
void record_move(const Surface& s, Trajectory& t, uint32_t from, uint32_t to) {
  const auto bump = [](std::vector<uint32_t>& v, uint32_t id) {
    if (id >= v.size()) v.resize(id + 1, 0);
    ++v[id];
  };
  if (s.parent(to) == from) {
    bump(t.down_cross, to);
  } else if (s.parent(from) == to) {
    bump(t.up_cross, from);
  } else {
    throw InvalidPathError("walk recorded a move between non-adjacent vertices");
  }
}

template <class Surface>
Trajectory run_walk(Surface& s, double lambda, size_t n_steps, uint32_t start, Rng& rng) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  Trajectory t;
  t.lambda = lambda;
  t.nodes.reserve(n_steps + 1);
  t.nodes.push_back(start);
  uint32_t cur = start;
  for (size_t i = 0; i < n_steps; ++i) {
    const uint32_t next = s.step(cur, lambda, rng);
    record_move(s, t, cur, next);
    t.nodes.push_back(next);
    cur = next;
  }
  return t;
}

// ============================================================================
// Fresh and regeneration epochs
// ============================================================================

struct EpochList {
  std::vector<size_t> fresh;           // theta_k, strictly increasing, theta_0 = 0
  std::vector<uint32_t> fresh_nodes;   // xi_k
  std::vector<size_t> regen;           // subset of fresh epochs
  size_t censored_tail = 0;            // late candidates not counted as regenerations
};

// Fresh epochs are the record times of the visited-set size.
EpochList fresh_epochs(const Trajectory& traj);

// Appends the regeneration epochs to the fresh decomposition: fresh epochs l
// with X_l != e* whose parent is never revisited in (l, n]. Candidates with
// l > n - tail_buffer are reported as censored.
template <class Surface>
EpochList regeneration_epochs(const Surface& s, const Trajectory& traj,
                              size_t tail_buffer) {
  EpochList out = fresh_epochs(traj);
  if (traj.nodes.empty()) return out;
  const size_t n = traj.steps();
  std::vector<int64_t> last_visit;
  for (size_t i = 0; i < traj.nodes.size(); ++i) {
    const uint32_t id = traj.nodes[i];
    if (id >= last_visit.size()) last_visit.resize(id + 1, -1);
    last_visit[id] = static_cast<int64_t>(i);
  }
  for (size_t k = 0; k < out.fresh.size(); ++k) {
    const size_t l = out.fresh[k];
    const uint32_t v = out.fresh_nodes[k];
    const uint32_t p = s.parent(v);
    if (p == kNoNode) continue;  // e* is never a regeneration point
    const int64_t lastp = p < last_visit.size() ? last_visit[p] : -1;
    if (lastp >= static_cast<int64_t>(l)) continue;  // parent revisited later
    if (tail_buffer > n || l > n - tail_buffer) {
      ++out.censored_tail;
    } else {
      out.regen.push_back(l);
    }
  }
  return out;
}

// Debug dump: CSV of (step, word, depth).
std::string trajectory_csv(const ArenaSurface& s, const Trajectory& traj);
std::string trajectory_csv(const ExplicitSurface& s, const Trajectory& traj);

}  // namespace gws
