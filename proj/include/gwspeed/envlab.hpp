#pragma once

// Verification laboratory: exact oracles (path probabilities, absorbing-chain
// solves, weighted tree enumeration) and the identity checks built on them.
//
// The identities under test:
//   * time reversal      -- a trajectory from the root's parent to a vertex x
//                           has the same probability as its reversed image in
//                           the backward tree at x (exact, per instance);
//   * reroot crossing    -- on a double tree, the walk hung at r follows a
//                           loop at e+ with probability lambda^-N times the
//                           two-sided walk's probability, N the number of
//                           root-edge crossings (exact, per instance);
//   * fresh reversal     -- at the k-th fresh epoch, (backward tree, reversed
//                           trajectory) and (cut tree, trajectory) have equal
//                           joint laws (exact, by finite enumeration);
//   * backward tree law  -- the backward tree at a fixed word is distributed
//                           as the tree cut at the reversed word (chi-square);
//   * green sum          -- the expected discounted occupation of e+ under
//                           the two-sided walk has a closed form in the
//                           escape probabilities (Monte Carlo vs closed);
//   * invariant degree   -- the walker's offspring count converges to the
//                           law reweighted by the environment density
//                           (simulation vs importance sampling).

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gwspeed/common.hpp"
#include "gwspeed/conductance.hpp"
#include "gwspeed/offspring.hpp"
#include "gwspeed/tree.hpp"
#include "gwspeed/walk.hpp"

namespace gws {

// ============================================================================
// Exact oracles
// ============================================================================

// Product of one-step kernel probabilities along a site path (tree with e*
// attached). Empty and single-vertex paths have probability 1. Throws
// InvalidPath on non-adjacent consecutive sites.
double path_probability(const ExplicitTree& tree, std::span<const Site> path,
                        double lambda);

// Same for the two-sided walk on a double tree.
double path_probability_y(const DoubleTree& dt, std::span<const DVert> path,
                          double lambda);

// Same for the walk hung at r; the path must avoid the left-side vertices at
// or below r.
double path_probability_yr(const DoubleTree& dt, const Word& r,
                           std::span<const DVert> path, double lambda);

// Finite state chain as explicit transition lists.
struct StateGraph {
  size_t n = 0;
  std::vector<std::vector<std::pair<uint32_t, double>>> out;
};

// The walk kernel on an explicit tree as a StateGraph over ExplicitSurface
// ids (0 is the root's parent, reflecting).
StateGraph kernel_graph(const ExplicitTree& tree, double lambda);

// Exact hitting probabilities P(hit `hit` before `avoid`) for every state,
// by a dense linear solve. Transient states that cannot reach either set
// make the harmonic system singular.
std::vector<double> absorbing_hit_prob(const StateGraph& g,
                                       std::span<const uint32_t> hit,
                                       std::span<const uint32_t> avoid);

// All depth-truncated tree shapes with their exact probabilities (counts are
// assigned to vertices of depth < depth; depth-level vertices are boundary).
struct WeightedTree {
  ExplicitTree tree;
  double probability = 0.0;
};
using WeightedTreeEnsemble = std::vector<WeightedTree>;

WeightedTreeEnsemble enumerate_trees(const OffspringLaw& law, int depth,
                                     size_t budget = 2'000'000);

// Streaming variant; the callback sees each shape once, in a fixed order.
void for_each_tree(const OffspringLaw& law, int depth, size_t budget,
                   const std::function<void(const ExplicitTree&, double)>& fn);

// Upper tail of the chi-square distribution (regularized incomplete gamma).
double chi_square_tail(double statistic, size_t dof);

// ============================================================================
// Identity checks
// ============================================================================

// |P(path in the tree) - P(reversed image in the backward tree at x)|.
// The path must run from e* to x with interior avoiding both.
double time_reversal_residual(const ExplicitTree& tree, const Word& x,
                              std::span<const Site> path, double lambda);

// |P(rerooted walk follows path) - lambda^-N * P(two-sided walk follows
// path)| for a loop at e+ avoiding the left side at or below r.
double reroot_crossing_residual(const DoubleTree& dt, const Word& r,
                                std::span<const DVert> path, double lambda);

struct SweepResult {
  double max_residual = 0.0;
  size_t instances = 0;
};

SweepResult time_reversal_sweep(size_t n_instances, uint64_t seed,
                                int max_depth = 5, size_t max_path_len = 30);
SweepResult reroot_crossing_sweep(size_t n_instances, uint64_t seed,
                                  int max_depth = 3, size_t max_path_len = 20);

// Exact enumeration check of the fresh-epoch reversal identity: both joint
// laws are summed over every tree shape (to depth L+1) and every trajectory
// reaching its k-th fresh vertex within L steps without revisiting e*;
// returns the largest absolute weight difference over the outcome set.
double fresh_reversal_residual(const OffspringLaw& law, double lambda, int k,
                               int max_epoch, size_t budget = 2'000'000);

// Chi-square comparison of the sampled backward-tree shape at x (depth-d
// truncation) against the exact law of the tree cut at the reversed word.
struct ChiSquareResult {
  double p_value = 1.0;
  double statistic = 0.0;
  size_t dof = 0;
  size_t n_samples = 0;
  bool vacuous = false;  // single category: nothing to test
};

ChiSquareResult backward_law_chi_square(const OffspringLaw& law, const Word& x,
                                        int depth, size_t n_samples,
                                        uint64_t seed);

// ============================================================================
// Invariant environment
// ============================================================================

// Unnormalized invariant density in terms of the walker's offspring count
// and the escape probabilities behind and ahead. Zero when beta_e is zero.
double density_weight(uint32_t nu_plus, double beta_e,
                      std::span<const double> beta_plus, double lambda);

struct DegreeLaw {
  std::vector<uint32_t> ks;
  std::vector<double> ps;      // same order as ks, sums to 1
  std::string provenance;      // "empirical" | "predicted"

  double probability_of(uint32_t k) const;
};

double tv_distance(const DegreeLaw& a, const DegreeLaw& b);

struct PredictedDegreeLaw {
  DegreeLaw law;
  double normalization = 0.0;         // Monte Carlo estimate of the constant
  double normalization_rel_stderr = 0.0;
};

PredictedDegreeLaw predicted_degree_law(const OffspringLaw& law, double lambda,
                                        size_t n_samples, double beta_tol,
                                        const Exec& ex);

struct EmpiricalDegreeLaw {
  DegreeLaw law;
  size_t accepted = 0;
  size_t rejected = 0;
};

EmpiricalDegreeLaw empirical_degree_law(const OffspringLaw& law, double lambda,
                                        size_t horizon, size_t replicas,
                                        const Exec& ex);

// ============================================================================
// Green sum on regular double trees
// ============================================================================

struct GreenSumResult {
  double mc = 0.0;
  double mc_stderr = 0.0;
  double closed = 0.0;
  double decay = 0.0;  // per-round geometric factor bounding the truncation bias
  size_t replicas = 0;
};

GreenSumResult green_sum_check(uint32_t b_left, uint32_t b_right, double lambda,
                               size_t horizon, size_t replicas, const Exec& ex);

}  // namespace gws
