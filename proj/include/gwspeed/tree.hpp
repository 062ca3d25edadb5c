#pragma once

// Trees.
//
// Two representations share one vertex-labelling scheme (words of positive
// letters, plus the artificial parent e* of the root):
//
//  * TreeArena    -- a lazily grown Galton-Watson tree. Child counts are a
//                    pure function of (seed, word): each node owns a hash
//                    chained from its parent's hash and its letter, and the
//                    count is drawn from a generator keyed by that hash. The
//                    tree is therefore identical for any expansion order, and
//                    walks on shared arenas are reproducible.
//  * ExplicitTree -- a small finite tree stored as its word set (closed under
//                    parent and left sibling). Exact oracles and the
//                    structural constructions (cut tree, backward tree,
//                    double tree) operate on these.

#include <cstdint>
#include <deque>
#include <mutex>
#include <atomic>
#include <optional>
#include <string>
#include <vector>

#include "gwspeed/common.hpp"
#include "gwspeed/offspring.hpp"

namespace gws {

// ============================================================================
// Lazy arena
// ============================================================================

using NodeId = uint32_t;
constexpr NodeId kNoNode = UINT32_MAX;

// Deterministic per-node randomness: the hash of a node is chained from its
// parent's hash and its 1-based letter, and seeds the count draw.
struct NodeStream {
  static uint64_t root_hash(uint64_t seed) { return mix64(seed, 0x726f6f74ULL); }
  static uint64_t child_hash(uint64_t parent_hash, Letter letter) {
    return mix64(parent_hash, 0x6b696431ULL + letter);
  }
  static uint32_t draw_count(const OffspringLaw& law, uint64_t node_hash) {
    Rng rng(mix64(node_hash, 0x636e7431ULL));
    return law.sample(rng);
  }
};

class TreeArena {
 public:
  static constexpr NodeId kRootParent = 0;  // e*, depth -1, exactly one child
  static constexpr NodeId kRoot = 1;        // e

  TreeArena(OffspringLaw law, uint64_t seed);

  const OffspringLaw& law() const { return law_; }
  uint64_t seed() const { return seed_; }

  // Number of children; samples and materializes them on first use.
  // Expansion is idempotent and internally synchronized, so distinct nodes
  // may be expanded from different threads.
  uint32_t child_count(NodeId id);

  // Children as ids (expanding if needed). Child letters are 1-based.
  std::vector<NodeId> expand(NodeId id);

  NodeId child(NodeId id, uint32_t letter);  // requires letter <= child_count
  NodeId parent(NodeId id) const;
  Letter letter(NodeId id) const;
  int depth(NodeId id) const;
  Word word(NodeId id) const;

  size_t node_count() const { return nodes_.size(); }

  // Follows `w` down from the root, expanding along the way. Returns kNoNode
  // if the tree does not contain the word.
  NodeId find(const Word& w);

  // Breadth-first exhaustion with a node budget. Returns true iff every
  // lineage dies out within the budget (the tree is provably finite);
  // false means the budget was hit or the frontier grew past
  // `frontier_limit`, in which case nothing is claimed.
  bool proven_finite(size_t node_budget, size_t frontier_limit = 4096);

  // Materializes all vertices with depth <= depth_limit.
  void materialize_depth(int depth_limit, size_t node_budget);

  // Words of all materialized vertices with depth <= depth_limit.
  std::vector<Word> prefix_words(int depth_limit) const;

 private:
  struct Node {
    uint64_t hash = 0;
    NodeId parent = kNoNode;
    std::atomic<NodeId> first_child{kNoNode};
    std::atomic<int32_t> count{-1};  // -1: not yet sampled
    Letter letter = 0;               // 1-based; 0 for e and e*
    int depth = 0;
    Node() = default;
  };

  Node& node(NodeId id) { return nodes_[id]; }
  const Node& node(NodeId id) const { return nodes_[id]; }

  OffspringLaw law_;
  uint64_t seed_;
  std::deque<Node> nodes_;  // stable references across growth
  std::mutex expand_mu_;
};

// ============================================================================
// Explicit finite trees
// ============================================================================

class ExplicitTree {
 public:
  // Validates the closure conditions: contains e; parents of members are
  // members; i1..i(n-1)j is a member for every j <= in.
  static ExplicitTree from_words(std::vector<Word> words);

  // Construction from per-vertex child counts discovered by the caller; the
  // closure holds by construction so validation is skipped.
  static ExplicitTree unchecked(std::vector<Word> sorted_words);

  size_t size() const { return words_.size(); }  // vertices excluding e*
  const std::vector<Word>& words() const { return words_; }

  bool contains(const Word& w) const;
  size_t index_of(const Word& w) const;  // throws NotInTreeError

  uint32_t child_count(const Word& w) const;
  uint32_t child_count_by_index(size_t i) const { return nchild_[i]; }
  int parent_index(size_t i) const { return parent_[i]; }  // -1 for the root

  int height() const;

  // One word per line in lexicographic order ("e" for the root).
  std::string serialize() const;
  static ExplicitTree deserialize(const std::string& text);

  // Canonical single-line form used as a hash/map key in the oracles.
  std::string canonical() const;

  friend bool operator==(const ExplicitTree& a, const ExplicitTree& b) {
    return a.words_ == b.words_;
  }

 private:
  void build_indexes();

  std::vector<Word> words_;   // sorted lexicographically; words_[0] = e
  std::vector<int> parent_;   // indexes into words_
  std::vector<uint32_t> nchild_;
};

// Vertices with depth <= depth_limit.
ExplicitTree truncate(const ExplicitTree& tree, int depth_limit);

// The arena's materialized prefix as an explicit tree (vertices to
// depth_limit, expanding as needed).
ExplicitTree explicit_prefix(TreeArena& arena, int depth_limit, size_t node_budget);

// ============================================================================
// Cut trees and backward trees
// ============================================================================

// Removes the strict descendants of x; x becomes a leaf. Throws NotInTreeError
// if x is not a vertex.
ExplicitTree cut_at(const ExplicitTree& tree, const Word& x);

// The label bijection behind the backward tree: ancestors of x map onto the
// reversed ancestral line of the reversed word, and a subtree hanging off the
// ancestral path at its deepest path vertex keeps its relative label. Defined
// on sites that are not strict descendants of x.
Site reversal_image(const Word& x, const Site& site);

// Cut at x, then re-hang the tree at x via reversal_image. In the result the
// parent of the root has one child, the reversed word is a leaf, and every
// other vertex keeps the child count of its preimage.
ExplicitTree backward_tree(const ExplicitTree& tree, const Word& x);

// ============================================================================
// Double trees
// ============================================================================

// Two trees joined by an edge between their roots, rooted on the + side.
struct DoubleTree {
  ExplicitTree left;   // vertices tagged -
  ExplicitTree right;  // vertices tagged +

  size_t vertex_count() const { return left.size() + right.size(); }
};

inline DoubleTree glue(ExplicitTree left, ExplicitTree right) {
  return DoubleTree{std::move(left), std::move(right)};
}

struct DVert {
  int8_t side = +1;  // -1: left tree, +1: right tree
  Word w;

  friend bool operator==(const DVert& a, const DVert& b) {
    return a.side == b.side && a.w == b.w;
  }
};

std::string dvert_format(const DVert& v);

// The vertex that becomes the parent of v when the double tree is hung at r
// (a vertex of the left tree). Four cases: up in the right tree; across the
// root edge; up in an off-path left subtree; one step toward r along r's
// ancestral line. Undefined on {u-, u >= r}.
DVert r_parent(const DoubleTree& dt, const DVert& v, const Word& r);

}  // namespace gws
