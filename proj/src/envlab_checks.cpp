#include <algorithm>
#include <cmath>
#include <map>

#include "gwspeed/envlab.hpp"

namespace gws {

namespace {

enum : uint64_t {
  kTagSweepRev = 0x72657631ULL,
  kTagSweepRoot = 0x72727431ULL,
  kTagChi = 0x63686931ULL,
  kTagEnvPred = 0x65707264ULL,
  kTagEnvEmp = 0x65656d70ULL,
  kTagGreen = 0x6772656eULL,
};

Rng task_rng(uint64_t seed, uint64_t stream, uint64_t tag, uint64_t index) {
  return Rng(mix64(mix64(mix64(seed, stream), tag), index));
}

std::string path_key(std::span<const Site> path) {
  std::string out;
  for (const Site& s : path) {
    out += site_format(s);
    out.push_back('>');
  }
  return out;
}

}  // namespace

// ============================================================================
// Time reversal (single instance)
// ============================================================================

double time_reversal_residual(const ExplicitTree& tree, const Word& x,
                              std::span<const Site> path, double lambda) {
  if (path.size() < 2 || !path.front().star)
    throw InvalidPathError("path must start at the parent of the root");
  if (path.back().star || path.back().w != x)
    throw InvalidPathError("path must end at the chosen vertex");
  for (size_t i = 1; i + 1 < path.size(); ++i) {
    if (path[i].star || path[i].w == x)
      throw InvalidPathError("path interior must avoid e* and the endpoint");
  }
  const double lhs = path_probability(tree, path, lambda);

  const ExplicitTree back = backward_tree(tree, x);
  std::vector<Site> mapped(path.size());
  const size_t n = path.size() - 1;
  for (size_t j = 0; j <= n; ++j) mapped[j] = reversal_image(x, path[n - j]);
  const double rhs = path_probability(back, mapped, lambda);
  return std::abs(lhs - rhs);
}

// ============================================================================
// Reroot crossing (single instance)
// ============================================================================

double reroot_crossing_residual(const DoubleTree& dt, const Word& r,
                                std::span<const DVert> path, double lambda) {
  if (path.size() < 2)
    throw InvalidPathError("need a loop of at least one step");
  const DVert eplus{+1, {}};
  if (!(path.front() == eplus) || !(path.back() == eplus))
    throw InvalidPathError("path must start and end at the double-tree root");
  for (const DVert& v : path) {
    if (v.side < 0 && word_is_ancestor_or_equal(r, v.w))
      throw InvalidPathError("path must avoid the left side at or below the reroot vertex");
  }
  size_t crossings = 0;
  const DVert eminus{-1, {}};
  for (size_t i = 0; i + 1 < path.size(); ++i)
    if (path[i] == eplus && path[i + 1] == eminus) ++crossings;

  const double lhs = path_probability_yr(dt, r, path, lambda);
  const double rhs = std::pow(lambda, -static_cast<double>(crossings)) *
                     path_probability_y(dt, path, lambda);
  return std::abs(lhs - rhs);
}

// ============================================================================
// Randomized instance sweeps
// ============================================================================

namespace {

const std::vector<OffspringLaw>& sweep_laws() {
  static const std::vector<OffspringLaw> laws = {
      OffspringLaw::parse("0:0.25,2:0.75"),
      OffspringLaw::parse("1:0.5,3:0.5"),
      OffspringLaw::parse("0:0.2,1:0.3,2:0.3,3:0.2"),
  };
  return laws;
}

double sweep_lambda(Rng& rng) {
  switch (rng.next_below(4)) {
    case 0: return 0.5;
    case 1: return 1.0;
    case 2: return 2.0;
    default: return 0.4 + 2.1 * rng.next_double();
  }
}

ExplicitTree sweep_tree(const OffspringLaw& law, Rng& rng, int max_depth) {
  const int depth = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(max_depth)));
  TreeArena arena(law, rng.next_u64());
  return explicit_prefix(arena, depth, 100'000);
}

}  // namespace

SweepResult time_reversal_sweep(size_t n_instances, uint64_t seed, int max_depth,
                                size_t max_path_len) {
  SweepResult out;
  Rng rng(mix64(seed, kTagSweepRev));
  while (out.instances < n_instances) {
    const OffspringLaw& law = sweep_laws()[rng.next_below(sweep_laws().size())];
    const ExplicitTree tree = sweep_tree(law, rng, max_depth);
    const double lambda = sweep_lambda(rng);
    if (tree.size() < 2) continue;
    // Any vertex may be the endpoint; prefer ones below the root.
    const Word x = tree.words()[1 + rng.next_below(tree.size() - 1)];

    // A nearest-neighbour trajectory from e* stopped at its first visit to x;
    // the interior avoids e* because the move up from the root is excluded.
    bool ok = false;
    std::vector<Site> path;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      path.clear();
      path.push_back(Site::root_parent());
      Word cur;  // the root
      for (size_t step = 0; step + 1 < max_path_len; ++step) {
        path.push_back(Site::of(cur));
        if (cur == x) {
          ok = true;
          break;
        }
        std::vector<Word> moves;
        if (!cur.empty()) moves.push_back(word_parent(cur));
        for (Letter j = 1; j <= tree.child_count(cur); ++j)
          moves.push_back(word_child(cur, j));
        if (moves.empty()) break;
        cur = moves[rng.next_below(moves.size())];
      }
    }
    if (!ok) continue;
    out.max_residual =
        std::max(out.max_residual, time_reversal_residual(tree, x, path, lambda));
    ++out.instances;
  }
  return out;
}

SweepResult reroot_crossing_sweep(size_t n_instances, uint64_t seed, int max_depth,
                                  size_t max_path_len) {
  SweepResult out;
  Rng rng(mix64(seed, kTagSweepRoot));
  while (out.instances < n_instances) {
    const OffspringLaw& law = sweep_laws()[rng.next_below(sweep_laws().size())];
    const DoubleTree dt =
        glue(sweep_tree(law, rng, max_depth), sweep_tree(law, rng, max_depth));
    const double lambda = sweep_lambda(rng);
    const Word r = dt.left.words()[rng.next_below(dt.left.size())];

    // A loop at e+ over the allowed region (neither at nor below r on the
    // left side).
    const auto allowed = [&](const DVert& v) {
      return v.side > 0 || !word_is_ancestor_or_equal(r, v.w);
    };
    const auto neighbours = [&](const DVert& v) {
      std::vector<DVert> nb;
      if (v.w.empty()) {
        nb.push_back(DVert{static_cast<int8_t>(-v.side), {}});
      } else {
        nb.push_back(DVert{v.side, word_parent(v.w)});
      }
      const ExplicitTree& side = v.side > 0 ? dt.right : dt.left;
      for (Letter j = 1; j <= side.child_count(v.w); ++j)
        nb.push_back(DVert{v.side, word_child(v.w, j)});
      std::erase_if(nb, [&](const DVert& u) { return !allowed(u); });
      return nb;
    };

    bool ok = false;
    std::vector<DVert> path;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      path.clear();
      DVert cur{+1, {}};
      path.push_back(cur);
      for (size_t step = 0; step < max_path_len; ++step) {
        const auto nb = neighbours(cur);
        if (nb.empty()) break;
        cur = nb[rng.next_below(nb.size())];
        path.push_back(cur);
        if (cur == DVert{+1, {}}) {
          ok = true;
          break;
        }
      }
    }
    if (!ok) continue;
    out.max_residual =
        std::max(out.max_residual, reroot_crossing_residual(dt, r, path, lambda));
    ++out.instances;
  }
  return out;
}

// ============================================================================
// Fresh-epoch reversal by exact enumeration
// ============================================================================

namespace {

// Enumerates every trajectory from e* reaching its k-th fresh vertex within
// max_epoch steps and not revisiting e*; calls emit(path, x, probability).
struct TrajEnum {
  const ExplicitTree* tree;
  double lambda;
  size_t k;
  size_t max_epoch;
  std::function<void(std::span<const Site>, const Word&, double)> emit;

  std::vector<Site> path;
  std::vector<Site> visited;

  void run() {
    path = {Site::root_parent()};
    visited = {Site::root_parent()};
    explore(1, 1.0);
  }

  void explore(size_t distinct, double prob) {
    const Site cur = path.back();  // by value: step_to reallocates the path
    if (distinct == k + 1) {
      emit(path, cur.w, prob);
      return;
    }
    if (path.size() - 1 == max_epoch) return;
    if (cur.star) {
      step_to(Site::root(), distinct, prob);
      return;
    }
    const uint32_t nu = tree->child_count(cur.w);
    const double denom = lambda + static_cast<double>(nu);
    if (!cur.w.empty()) {
      // Moves into e* are dropped: the identity is conditioned on reaching
      // the fresh vertex before returning there.
      step_to(Site::of(word_parent(cur.w)), distinct, prob * lambda / denom);
    }
    for (Letter j = 1; j <= nu; ++j)
      step_to(Site::of(word_child(cur.w, j)), distinct, prob / denom);
  }

  void step_to(const Site& next, size_t distinct, double prob) {
    const bool fresh = std::find(visited.begin(), visited.end(), next) == visited.end();
    path.push_back(next);
    if (fresh) visited.push_back(next);
    explore(distinct + (fresh ? 1 : 0), prob);
    path.pop_back();
    if (fresh) visited.pop_back();
  }
};

}  // namespace

double fresh_reversal_residual(const OffspringLaw& law, double lambda, int k,
                               int max_epoch, size_t budget) {
  if (k < 1) throw SimError("BadArgument", "fresh index must be >= 1");
  if (max_epoch < k) throw SimError("BadArgument", "horizon shorter than the fresh index");
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");

  const int M = max_epoch + 1;  // enumeration depth
  // Deepest truncation that both statistics determine exactly from the
  // enumerated prefix: the fresh vertex has depth at most k - 1, and the
  // backward map sends a vertex of image depth j to a preimage of depth at
  // most |x| + j - 1.
  const int D = std::min(M, M + 2 - k);

  std::map<std::string, double> lhs, rhs;
  for_each_tree(law, M, budget, [&](const ExplicitTree& tree, double p_tree) {
    TrajEnum te;
    te.tree = &tree;
    te.lambda = lambda;
    te.k = static_cast<size_t>(k);
    te.max_epoch = static_cast<size_t>(max_epoch);
    te.emit = [&](std::span<const Site> path, const Word& x, double p_path) {
      const double weight = p_tree * p_path;
      rhs[truncate(cut_at(tree, x), D).canonical() + "|" + path_key(path)] += weight;

      const ExplicitTree back = backward_tree(tree, x);
      const size_t n = path.size() - 1;
      std::vector<Site> mapped(path.size());
      for (size_t j = 0; j <= n; ++j) mapped[j] = reversal_image(x, path[n - j]);
      lhs[truncate(back, D).canonical() + "|" + path_key(mapped)] += weight;
    };
    te.run();
  });

  double residual = 0.0;
  for (const auto& [key, w] : lhs) {
    const auto it = rhs.find(key);
    residual = std::max(residual, std::abs(w - (it == rhs.end() ? 0.0 : it->second)));
  }
  for (const auto& [key, w] : rhs) {
    if (!lhs.contains(key)) residual = std::max(residual, w);
  }
  return residual;
}

// ============================================================================
// Backward-tree law, chi-square
// ============================================================================

ChiSquareResult backward_law_chi_square(const OffspringLaw& law, const Word& x,
                                        int depth, size_t n_samples,
                                        uint64_t seed) {
  if (static_cast<int>(x.size()) > depth)
    throw SimError("BadArgument", "statistic depth must cover the chosen word");
  if (n_samples < 100)
    throw InsufficientSamplesError("need at least 100 samples for the shape test");

  const Word xbar = word_reversed(x);
  const std::string kDead = "@dead";

  // Exact law of the depth-truncated cut tree at the reversed word.
  std::map<std::string, double> expected;
  for_each_tree(law, depth, 5'000'000, [&](const ExplicitTree& tree, double p) {
    std::string key = kDead;
    if (tree.contains(xbar)) key = cut_at(tree, xbar).canonical();
    expected[key] += p;
  });

  // Sampled law of the depth-truncated backward tree at x.
  const int prefix_depth = static_cast<int>(x.size()) + depth;
  std::map<std::string, size_t> counts;
  for (size_t i = 0; i < n_samples; ++i) {
    Rng rng = task_rng(seed, kStreamTree, kTagChi, i);
    TreeArena arena(law, rng.next_u64());
    std::string key = kDead;
    if (arena.find(x) != kNoNode) {
      const ExplicitTree prefix = explicit_prefix(arena, prefix_depth, 1'000'000);
      key = truncate(backward_tree(prefix, x), depth).canonical();
    }
    ++counts[key];
  }

  // Pearson statistic with small expected cells pooled.
  ChiSquareResult out;
  out.n_samples = n_samples;
  const double nd = static_cast<double>(n_samples);
  double pooled_exp = 0.0, pooled_obs = 0.0;
  std::vector<std::pair<double, double>> cells;  // (expected, observed)
  for (const auto& [key, p] : expected) {
    const double e = p * nd;
    const auto it = counts.find(key);
    const double o = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    if (e < 5.0) {
      pooled_exp += e;
      pooled_obs += o;
    } else {
      cells.push_back({e, o});
    }
  }
  for (const auto& [key, o] : counts) {
    if (!expected.contains(key)) {
      // A shape the exact law forbids: the identity fails outright.
      out.p_value = 0.0;
      out.statistic = std::numeric_limits<double>::infinity();
      return out;
    }
  }
  if (pooled_exp > 0.0) cells.push_back({pooled_exp, pooled_obs});
  if (cells.size() < 2) {
    out.vacuous = true;
    out.p_value = 1.0;
    return out;
  }
  double stat = 0.0;
  for (const auto& [e, o] : cells) stat += (o - e) * (o - e) / e;
  out.statistic = stat;
  out.dof = cells.size() - 1;
  out.p_value = chi_square_tail(stat, out.dof);
  return out;
}

// ============================================================================
// Invariant environment
// ============================================================================

double density_weight(uint32_t nu_plus, double beta_e,
                      std::span<const double> beta_plus, double lambda) {
  if (!(lambda > 0.0)) throw SimError("BadArgument", "lambda must be positive");
  if (beta_plus.size() != nu_plus)
    throw SimError("BadArgument", "need one forward escape probability per child");
  if (beta_e <= 0.0) return 0.0;
  double denom = lambda - 1.0 + beta_e;
  for (double b : beta_plus) denom += b;
  if (denom <= 0.0)
    throw NonpositiveDenominatorError("density denominator is not positive");
  return (lambda + static_cast<double>(nu_plus)) * beta_e / denom;
}

double DegreeLaw::probability_of(uint32_t k) const {
  for (size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return ps[i];
  return 0.0;
}

double tv_distance(const DegreeLaw& a, const DegreeLaw& b) {
  std::vector<uint32_t> support;
  support.insert(support.end(), a.ks.begin(), a.ks.end());
  support.insert(support.end(), b.ks.begin(), b.ks.end());
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  double tv = 0.0;
  for (uint32_t k : support) tv += std::abs(a.probability_of(k) - b.probability_of(k));
  return tv / 2.0;
}

namespace {

DegreeLaw normalize_degree_law(const std::map<uint32_t, double>& mass,
                               std::string provenance) {
  double total = 0.0;
  for (const auto& [k, w] : mass) total += w;
  DegreeLaw out;
  out.provenance = std::move(provenance);
  for (const auto& [k, w] : mass) {
    if (w <= 0.0) continue;
    out.ks.push_back(k);
    out.ps.push_back(w / total);
  }
  return out;
}

}  // namespace

PredictedDegreeLaw predicted_degree_law(const OffspringLaw& law, double lambda,
                                        size_t n_samples, double beta_tol,
                                        const Exec& ex) {
  validate_regime(law, lambda);
  if (n_samples < 2) throw SimError("BadArgument", "need at least 2 samples");
  std::vector<double> weight(n_samples);
  std::vector<uint32_t> kval(n_samples);
  parallel_for(n_samples, ex.workers, [&](size_t i) {
    Rng rng = task_rng(ex.seed, kStreamSample, kTagEnvPred, i);
    const uint32_t nu = law.sample(rng);
    const double beta_e = sample_beta(law, lambda, beta_tol, rng);
    double denom = lambda - 1.0 + beta_e;
    for (uint32_t j = 0; j < nu; ++j)
      denom += sample_beta(law, lambda, beta_tol, rng);
    kval[i] = nu;
    weight[i] = beta_e <= 0.0
                    ? 0.0
                    : (lambda + static_cast<double>(nu)) * beta_e /
                          std::max(denom, beta_tol);
  });
  std::map<uint32_t, double> mass;
  for (size_t i = 0; i < n_samples; ++i) mass[kval[i]] += weight[i];

  PredictedDegreeLaw out;
  out.law = normalize_degree_law(mass, "predicted");
  const MeanStderr mw = mean_stderr(weight);
  out.normalization = mw.mean;
  if (mw.mean <= 0.0)
    throw DegenerateDenominatorError("all density weights vanished");
  out.normalization_rel_stderr = mw.stderr_ / mw.mean;
  return out;
}

EmpiricalDegreeLaw empirical_degree_law(const OffspringLaw& law, double lambda,
                                        size_t horizon, size_t replicas,
                                        const Exec& ex) {
  validate_regime(law, lambda);
  std::vector<int64_t> degree(replicas, -1);  // -1: rejected
  parallel_for(replicas, ex.workers, [&](size_t r) {
    Rng tree_rng = task_rng(ex.seed, kStreamTree, kTagEnvEmp, r);
    TreeArena arena(law, tree_rng.next_u64());
    if (arena.proven_finite(20'000, 256)) return;
    ArenaSurface surface(arena);
    Rng walk_rng = task_rng(ex.seed, kStreamWalk, kTagEnvEmp, r);
    const Trajectory traj =
        run_walk(surface, lambda, horizon, TreeArena::kRootParent, walk_rng);
    const uint32_t last = traj.nodes.back();
    degree[r] = last == TreeArena::kRootParent
                    ? 1
                    : static_cast<int64_t>(arena.child_count(last));
  });
  EmpiricalDegreeLaw out;
  std::map<uint32_t, double> mass;
  for (int64_t d : degree) {
    if (d < 0) {
      ++out.rejected;
      continue;
    }
    ++out.accepted;
    mass[static_cast<uint32_t>(d)] += 1.0;
  }
  if (out.accepted == 0)
    throw AllReplicasRejectedError("every replica tree was provably finite");
  out.law = normalize_degree_law(mass, "empirical");
  return out;
}

// ============================================================================
// Green sum
// ============================================================================

GreenSumResult green_sum_check(uint32_t b_left, uint32_t b_right, double lambda,
                               size_t horizon, size_t replicas, const Exec& ex) {
  if (!(lambda > 0.0) || lambda >= static_cast<double>(std::min(b_left, b_right)))
    throw SimError("DomainError", "need lambda < min branching for transient sides");
  const double beta_l = beta_regular(b_left, lambda);
  const double beta_r = beta_regular(b_right, lambda);

  GreenSumResult out;
  out.closed = (lambda + static_cast<double>(b_right)) /
               (lambda - 1.0 + beta_l + static_cast<double>(b_right) * beta_r);
  out.decay = (1.0 - beta_l) * (1.0 - beta_r) / lambda;
  out.replicas = replicas;

  // On regular trees the walk projected to (side, depth) is Markov and the
  // summand depends only on that projection, so the chain is simulated
  // directly.
  std::vector<double> sums(replicas);
  parallel_for(replicas, ex.workers, [&](size_t r) {
    Rng rng = task_rng(ex.seed, kStreamWalk, kTagGreen, r);
    int side = +1;  // start at e+
    size_t depth = 0;
    double discount = 1.0;  // lambda^-N
    double sum = 0.0;
    for (size_t l = 0;; ++l) {
      if (side > 0 && depth == 0) sum += discount;
      if (l == horizon) break;
      const double b = static_cast<double>(side > 0 ? b_right : b_left);
      const double u = rng.next_double() * (lambda + b);
      if (u < lambda) {
        if (depth > 0) {
          --depth;
        } else if (side > 0) {
          side = -1;  // the crossing e+ -> e- drives the discount
          discount /= lambda;
        } else {
          side = +1;
        }
      } else {
        ++depth;
      }
    }
    sums[r] = sum;
  });
  const MeanStderr ms = mean_stderr(sums);
  out.mc = ms.mean;
  out.mc_stderr = ms.stderr_;
  return out;
}

}  // namespace gws
