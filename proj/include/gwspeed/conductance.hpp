#pragma once

// Escape probabilities. beta(x) is the probability that the walk started at
// x never reaches the parent of x; it is positive exactly when the subtree
// at x is infinite and satisfies beta = S / (lambda + S) with S the sum of
// the children's values. The level-n variant beta_n (boundary value 1 at
// level n) decreases to beta.

#include <cstdint>

#include "gwspeed/common.hpp"
#include "gwspeed/offspring.hpp"
#include "gwspeed/tree.hpp"

namespace gws {

// One recursion step: S / (lambda + S) over the child values; empty -> 0.
double beta_recursion_pass(std::span<const double> child_values, double lambda);

// Closed form for the b-regular tree: (b - lambda) / b, the positive fixed
// point of the recursion. Requires 0 < lambda < b.
double beta_regular(uint32_t b, double lambda);

// Probability of hitting level `level` before e*, by bottom-up recursion with
// boundary value 1 at level vertices (true leaves above the level contribute
// 0 through the empty sum).
double beta_n_exact(const ExplicitTree& tree, int level, double lambda);

struct BetaBracket {
  double lower = 0.0;
  double upper = 1.0;
  int depth = 0;
  bool exact_zero = false;  // the tree is provably finite

  double width() const { return upper - lower; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

// Certified interval for beta on the arena's depth-`depth` truncation: upper
// is the recursion with boundary 1 at the unexpanded frontier (the level-
// depth quantity), lower the recursion with boundary 0 there. Both contain
// the true beta and every beta_n with n >= depth; if materialization proves
// the tree finite the bracket collapses to exact zero.
BetaBracket beta_bracket(TreeArena& arena, double lambda, int depth,
                         size_t node_budget = 1'000'000);

// One i.i.d. draw of beta(e): grows a fresh tree from `rng`, doubling the
// evaluation depth until either the tree is proven finite (returns exactly 0)
// or the level quantities settle to within `tol`; the returned point is then
// within tol/2 of the tree's beta. The deepening evaluator is storage-free
// (it re-derives child counts from the deterministic per-node streams), so
// memory stays O(depth) even for millions of visited vertices.
double sample_beta(const OffspringLaw& law, double lambda, double tol, Rng& rng,
                   size_t visit_budget = 40'000'000);

}  // namespace gws
