#include "gwspeed/conductance.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace gws {

double beta_recursion_pass(std::span<const double> child_values, double lambda) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  double s = 0.0;
  for (double v : child_values) s += v;
  return s == 0.0 ? 0.0 : s / (lambda + s);
}

double beta_regular(uint32_t b, double lambda) {
  if (b < 1) throw SimError("BadArgument", "branching number must be >= 1");
  if (!(lambda > 0.0) || !(lambda < static_cast<double>(b)))
    throw SimError("DomainError", "beta_regular needs 0 < lambda < b");
  return (static_cast<double>(b) - lambda) / static_cast<double>(b);
}

namespace {

double beta_n_rec(const ExplicitTree& tree, const std::vector<std::vector<size_t>>& kids,
                  size_t idx, int level, double lambda) {
  const int d = static_cast<int>(tree.words()[idx].size());
  if (d >= level) return 1.0;
  double s = 0.0;
  for (size_t c : kids[idx]) s += beta_n_rec(tree, kids, c, level, lambda);
  return s == 0.0 ? 0.0 : s / (lambda + s);
}

}  // namespace

double beta_n_exact(const ExplicitTree& tree, int level, double lambda) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  if (level <= 0) return 1.0;
  std::vector<std::vector<size_t>> kids(tree.size());
  for (size_t i = 1; i < tree.size(); ++i)
    kids[static_cast<size_t>(tree.parent_index(i))].push_back(i);
  return beta_n_rec(tree, kids, 0, level, lambda);
}

// ----------------------------------------------------------------------------
// Bracket on an arena truncation
// ----------------------------------------------------------------------------

namespace {

struct BracketEval {
  TreeArena* arena;
  double lambda;
  int depth;
  bool saw_frontier = false;

  // boundary = 1 for the upper value, 0 for the lower.
  double eval(NodeId id, double boundary) {
    if (arena->depth(id) >= depth) {
      saw_frontier = true;
      return boundary;
    }
    const uint32_t nu = arena->child_count(id);
    double s = 0.0;
    for (uint32_t letter = 1; letter <= nu; ++letter)
      s += eval(arena->child(id, letter), boundary);
    return s == 0.0 ? 0.0 : s / (lambda + s);
  }
};

}  // namespace

BetaBracket beta_bracket(TreeArena& arena, double lambda, int depth,
                         size_t node_budget) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  if (depth < 1) throw SimError("BadArgument", "bracket depth must be >= 1");
  arena.materialize_depth(depth, node_budget);

  BetaBracket out;
  out.depth = depth;
  BracketEval up{&arena, lambda, depth};
  out.upper = up.eval(TreeArena::kRoot, 1.0);
  if (!up.saw_frontier) {
    // Every lineage dies above the frontier: the tree is finite, beta = 0.
    out.exact_zero = true;
    out.lower = out.upper = 0.0;
    return out;
  }
  BracketEval lo{&arena, lambda, depth};
  out.lower = lo.eval(TreeArena::kRoot, 0.0);
  return out;
}

// ----------------------------------------------------------------------------
// Storage-free sampling of beta(e)
// ----------------------------------------------------------------------------

namespace {

// Frontier-refinement evaluation of beta over the deterministic count
// streams.
//
// A partial tree is grown leaf by leaf. Unexpanded leaves carry the value
// (k_max - lambda)/k_max, an upper bound for every subtree (the full
// k_max-ary tree dominates by Rayleigh monotonicity), so the root value is
// always an upper estimate and decreases as leaves are expanded. A leaf is
// pruned instead of expanded when its influence on the root -- the product
// of lambda/(lambda + S)^2 along its ancestor chain -- times the boundary
// value falls below its share of the error budget. Shares split over the
// currently live children per level (an exactly dead subtree frees its
// share), so simultaneously pruned leaves carry total share about 1 and the
// pruned mass stays near tol/2.
//
// Bushy regions resolve within a dozen levels because their influence
// decays like (lambda/m^2)^depth while shares only decay like m^-depth;
// thin necks keep a share near 1 and are followed at a few vertices per
// level until they either die (the value collapses to an exact 0) or boom.
// This keeps rare near-boundary trees at thousands of vertices where a
// uniform-depth evaluation would need m^depth.
struct FrontierEval {
  static constexpr uint32_t kNone = UINT32_MAX;

  struct PNode {
    uint64_t hash;
    uint32_t parent;
    uint32_t first_child = 0;
    int32_t nu = -1;  // -1: unexpanded leaf
    double value;     // current upper estimate; boundary value if unexpanded
    double sum = 0.0; // sum of child values, valid once expanded
  };

  const OffspringLaw* law;
  double lambda;
  double cap;
  double half_tol;
  size_t budget;
  size_t ops = 0;
  std::vector<PNode> nodes;
  std::deque<uint32_t> frontier;
  double pruned_mass = 0.0;

  FrontierEval(const OffspringLaw& l, double lam, double cap_, double tol,
               size_t budget_)
      : law(&l), lambda(lam), cap(cap_), half_tol(tol / 2.0), budget(budget_) {}

  void charge(size_t n) {
    ops += n;
    if (ops > budget || nodes.size() > budget)
      throw DepthBudgetError("visit budget exhausted while evaluating beta");
  }

  double run(uint64_t root_hash) {
    nodes.push_back(PNode{root_hash, kNone, 0, -1, cap});
    frontier.push_back(0);
    while (!frontier.empty()) {
      const uint32_t idx = frontier.front();
      frontier.pop_front();
      double infl = 1.0;
      double share = 1.0;
      size_t climbed = 0;
      for (uint32_t a = nodes[idx].parent; a != kNone; a = nodes[a].parent) {
        const double d = lambda + nodes[a].sum;
        infl *= lambda / (d * d);
        uint32_t live = 0;
        for (uint32_t j = 0; j < static_cast<uint32_t>(nodes[a].nu); ++j)
          if (nodes[nodes[a].first_child + j].value > 0.0) ++live;
        share /= static_cast<double>(live ? live : 1);
        climbed += 1 + static_cast<size_t>(nodes[a].nu);
        if (infl * cap < 1e-18) break;
      }
      charge(climbed + 1);
      const double potential = infl * cap;
      if (potential < 1e-18 || potential <= half_tol * share) {
        pruned_mass += potential;
        continue;
      }
      expand(idx);
    }
    const double v = nodes[0].value;
    return v == 0.0 ? 0.0 : std::max(0.0, v - pruned_mass / 2.0);
  }

  void expand(uint32_t idx) {
    const uint32_t nu = NodeStream::draw_count(*law, nodes[idx].hash);
    const uint64_t h = nodes[idx].hash;
    const uint32_t first = static_cast<uint32_t>(nodes.size());
    charge(nu + 1);
    for (uint32_t j = 1; j <= nu; ++j) {
      nodes.push_back(PNode{NodeStream::child_hash(h, j), idx, 0, -1, cap});
      frontier.push_back(first + j - 1);
    }
    PNode& n = nodes[idx];
    n.nu = static_cast<int32_t>(nu);
    n.first_child = first;
    n.sum = static_cast<double>(nu) * cap;
    n.value = nu == 0 ? 0.0 : n.sum / (lambda + n.sum);
    // Re-derive ancestor sums from their children (exact, no drift) until a
    // value stops changing.
    for (uint32_t a = nodes[idx].parent; a != kNone; a = nodes[a].parent) {
      charge(static_cast<size_t>(nodes[a].nu));
      double s = 0.0;
      for (uint32_t j = 0; j < static_cast<uint32_t>(nodes[a].nu); ++j)
        s += nodes[nodes[a].first_child + j].value;
      nodes[a].sum = s;
      const double val = s == 0.0 ? 0.0 : s / (lambda + s);
      if (val == nodes[a].value) break;
      nodes[a].value = val;
    }
  }
};

}  // namespace

double sample_beta(const OffspringLaw& law, double lambda, double tol, Rng& rng,
                   size_t visit_budget) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  if (!(tol > 0.0)) throw SimError("BadArgument", "tolerance must be positive");

  const uint64_t tree_seed = rng.next_u64();
  const double kmax = static_cast<double>(law.k_max());
  if (lambda >= kmax) return 0.0;  // dominated by the critical regular tree
  const double cap = (kmax - lambda) / kmax;

  FrontierEval ev(law, lambda, cap, tol, visit_budget);
  return ev.run(NodeStream::root_hash(tree_seed));
}

}  // namespace gws
