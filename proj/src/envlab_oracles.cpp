#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>

#include "gwspeed/envlab.hpp"

namespace gws {

// ============================================================================
// Path probabilities
// ============================================================================

double path_probability(const ExplicitTree& tree, std::span<const Site> path,
                        double lambda) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  if (path.size() <= 1) return 1.0;
  const ExplicitSurface s(tree);
  double prob = 1.0;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    const double p = s.step_prob(s.id_of(path[i]), s.id_of(path[i + 1]), lambda);
    if (p == 0.0)
      throw InvalidPathError("non-adjacent step " + site_format(path[i]) + " -> " +
                             site_format(path[i + 1]));
    prob *= p;
  }
  return prob;
}

double path_probability_y(const DoubleTree& dt, std::span<const DVert> path,
                          double lambda) {
  if (path.size() <= 1) return 1.0;
  const DoubleLayout layout(dt);
  const DoubleSurfaceY s(layout);
  double prob = 1.0;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    const double p =
        s.step_prob(layout.id_of(path[i]), layout.id_of(path[i + 1]), lambda);
    if (p == 0.0)
      throw InvalidPathError("non-adjacent step " + dvert_format(path[i]) + " -> " +
                             dvert_format(path[i + 1]));
    prob *= p;
  }
  return prob;
}

double path_probability_yr(const DoubleTree& dt, const Word& r,
                           std::span<const DVert> path, double lambda) {
  if (path.size() <= 1) return 1.0;
  const DoubleLayout layout(dt);
  const DoubleSurfaceYr s(layout, r);
  double prob = 1.0;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    const uint32_t from = layout.id_of(path[i]);
    const uint32_t to = layout.id_of(path[i + 1]);
    if (!s.allowed(from) || !s.allowed(to))
      throw InvalidPathError("path enters the excluded subtree below the reroot vertex");
    const double p = s.step_prob(from, to, lambda);
    if (p == 0.0)
      throw InvalidPathError("non-adjacent step " + dvert_format(path[i]) + " -> " +
                             dvert_format(path[i + 1]));
    prob *= p;
  }
  return prob;
}

// ============================================================================
// Absorbing-chain solve
// ============================================================================

StateGraph kernel_graph(const ExplicitTree& tree, double lambda) {
  const ExplicitSurface s(tree);
  StateGraph g;
  g.n = s.size();
  g.out.resize(g.n);
  g.out[0].push_back({1, 1.0});  // reflection at e*
  for (uint32_t id = 1; id < g.n; ++id) {
    const double denom = lambda + static_cast<double>(s.child_count(id));
    g.out[id].push_back({s.parent(id), lambda / denom});
    for (uint32_t letter = 1; letter <= s.child_count(id); ++letter)
      g.out[id].push_back({s.child(id, letter), 1.0 / denom});
  }
  return g;
}

std::vector<double> absorbing_hit_prob(const StateGraph& g,
                                       std::span<const uint32_t> hit,
                                       std::span<const uint32_t> avoid) {
  std::vector<int8_t> kind(g.n, 0);  // 0 transient, 1 hit, -1 avoid
  for (uint32_t s : hit) kind[s] = 1;
  for (uint32_t s : avoid) {
    if (kind[s] == 1) throw SimError("BadArgument", "hit and avoid sets overlap");
    kind[s] = -1;
  }

  // Transient states must be able to reach an absorbing state, otherwise the
  // harmonic system is singular.
  std::vector<std::vector<uint32_t>> rev(g.n);
  for (uint32_t u = 0; u < g.n; ++u)
    for (const auto& [v, p] : g.out[u])
      if (p > 0.0) rev[v].push_back(u);
  std::vector<uint8_t> reaches(g.n, 0);
  std::deque<uint32_t> queue;
  for (uint32_t s = 0; s < g.n; ++s)
    if (kind[s] != 0) {
      reaches[s] = 1;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    const uint32_t v = queue.front();
    queue.pop_front();
    for (uint32_t u : rev[v])
      if (!reaches[u]) {
        reaches[u] = 1;
        queue.push_back(u);
      }
  }
  std::vector<uint32_t> transient;
  std::vector<int> slot(g.n, -1);
  for (uint32_t s = 0; s < g.n; ++s) {
    if (kind[s] != 0) continue;
    if (!reaches[s])
      throw SingularSystemError("state " + std::to_string(s) +
                                " cannot reach the absorbing sets");
    slot[s] = static_cast<int>(transient.size());
    transient.push_back(s);
  }

  const size_t m = transient.size();
  std::vector<double> result(g.n, 0.0);
  for (uint32_t s : hit) result[s] = 1.0;
  if (m == 0) return result;

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<long>(m),
                                                static_cast<long>(m));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<long>(m));
  for (size_t i = 0; i < m; ++i) {
    for (const auto& [v, p] : g.out[transient[i]]) {
      if (kind[v] == 1) {
        b[static_cast<long>(i)] += p;
      } else if (kind[v] == 0) {
        A(static_cast<long>(i), slot[v]) -= p;
      }
    }
  }
  const Eigen::VectorXd h = A.partialPivLu().solve(b);
  if (!h.allFinite()) throw SingularSystemError("harmonic system solve failed");
  for (size_t i = 0; i < m; ++i) result[transient[i]] = h[static_cast<long>(i)];
  return result;
}

// ============================================================================
// Weighted tree enumeration
// ============================================================================

namespace {

struct TreeGen {
  const OffspringLaw* law;
  int depth;
  size_t budget;
  const std::function<void(const ExplicitTree&, double)>* fn;
  size_t emitted = 0;

  std::vector<Word> words{{}};      // BFS discovery order, starts with e
  std::vector<Word> pending{{}};    // vertices awaiting a count (depth < depth)

  void rec(size_t i, double prob) {
    if (i == pending.size()) {
      if (++emitted > budget)
        throw EnumerationBudgetError("tree enumeration exceeded the budget of " +
                                     std::to_string(budget) + " shapes");
      std::vector<Word> sorted = words;
      std::sort(sorted.begin(), sorted.end());
      const ExplicitTree t = ExplicitTree::unchecked(std::move(sorted));
      (*fn)(t, prob);
      return;
    }
    const Word w = pending[i];
    const size_t words_mark = words.size();
    const size_t pending_mark = pending.size();
    for (const auto& e : law->entries()) {
      for (Letter j = 1; j <= e.k; ++j) {
        Word c = word_child(w, j);
        if (static_cast<int>(c.size()) < depth) pending.push_back(c);
        words.push_back(std::move(c));
      }
      rec(i + 1, prob * e.p);
      words.resize(words_mark);
      pending.resize(pending_mark);
    }
  }
};

}  // namespace

void for_each_tree(const OffspringLaw& law, int depth, size_t budget,
                   const std::function<void(const ExplicitTree&, double)>& fn) {
  if (depth < 0) throw SimError("BadArgument", "enumeration depth must be >= 0");
  if (depth == 0) {
    fn(ExplicitTree::unchecked({{}}), 1.0);
    return;
  }
  TreeGen gen{&law, depth, budget, &fn};
  gen.rec(0, 1.0);
}

WeightedTreeEnsemble enumerate_trees(const OffspringLaw& law, int depth,
                                     size_t budget) {
  WeightedTreeEnsemble out;
  for_each_tree(law, depth, budget, [&](const ExplicitTree& t, double p) {
    out.push_back({t, p});
  });
  return out;
}

// ============================================================================
// Chi-square tail
// ============================================================================

namespace {

// Regularized incomplete gamma Q(a, x), by series for x < a + 1 and by the
// Lentz continued fraction otherwise.
double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw SimError("BadArgument", "gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 10000; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    const double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    return 1.0 - p;
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double chi_square_tail(double statistic, size_t dof) {
  if (dof == 0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return gamma_q(static_cast<double>(dof) / 2.0, statistic / 2.0);
}

}  // namespace gws
