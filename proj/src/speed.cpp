#include "gwspeed/speed.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace gws {

namespace {

enum : uint64_t {
  kTagFormula = 0x666f726dULL,
  kTagEmpirical = 0x656d7069ULL,
  kTagRegen = 0x7265676eULL,
  kTagDrift = 0x64726674ULL,
  kTagMlambda = 0x6d6c616dULL,
  kTagFreshRate = 0x66727368ULL,
};

Rng task_rng(uint64_t seed, uint64_t stream, uint64_t tag, uint64_t index) {
  return Rng(mix64(mix64(mix64(seed, stream), tag), index));
}

// Draws (nu; beta_0..beta_nu) and evaluates the two summands of the ratio.
// A zero beta_0 contributes zero to both (the continuous extension at the
// all-extinct atom). The denominator is floored at beta_tol, the resolution
// of the sampled escape probabilities.
struct RatioSample {
  double a = 0.0;  // numerator summand
  double b = 0.0;  // denominator summand
};

template <class NumFn, class DenFn>
RatioSample draw_ratio_sample(const OffspringLaw& law, double lambda,
                              const SampleParams& sp, Rng& rng, NumFn num,
                              DenFn den) {
  const uint32_t nu = law.sample(rng);
  std::vector<double> betas(nu + 1);
  for (auto& b : betas) b = sample_beta(law, lambda, sp.beta_tol, rng, sp.beta_budget);
  RatioSample out;
  if (betas[0] <= 0.0) return out;
  double denom = lambda - 1.0;
  for (double b : betas) denom += b;
  denom = std::max(denom, sp.beta_tol);
  out.a = num(nu) * betas[0] / denom;
  out.b = den(nu) * betas[0] / denom;
  return out;
}

template <class NumFn, class DenFn>
SpeedEstimate ratio_estimate(const OffspringLaw& law, double lambda,
                             const SampleParams& sp, const Exec& ex,
                             uint64_t tag, const char* method, NumFn num,
                             DenFn den) {
  validate_regime(law, lambda);
  const size_t n = sp.n_samples;
  if (n < 2) throw SimError("BadArgument", "need at least 2 samples");
  std::vector<double> a(n), b(n);
  parallel_for(n, ex.workers, [&](size_t i) {
    Rng rng = task_rng(ex.seed, kStreamSample, tag, i);
    const RatioSample s = draw_ratio_sample(law, lambda, sp, rng, num, den);
    a[i] = s.a;
    b[i] = s.b;
  });
  const MeanStderr mb = mean_stderr(b);
  if (std::abs(mb.mean) <= 3.0 * mb.stderr_)
    throw DegenerateDenominatorError("ratio denominator not resolved from zero");
  const double ma = pairwise_sum(a) / static_cast<double>(n);
  SpeedEstimate est;
  est.value = ma / mb.mean;
  est.stderr_ = ratio_stderr(a, b, est.value);
  est.n_effective = n;
  est.method = method;
  return est;
}

// Per-replica walk shared by the trajectory estimators. A null arena means
// the replica's tree is provably finite (rejected: this conditions the
// annealed law on survival).
struct ReplicaWalk {
  std::unique_ptr<TreeArena> arena;
  Trajectory traj;
};

ReplicaWalk run_replica(const OffspringLaw& law, double lambda,
                        const WalkParams& wp, const Exec& ex, uint64_t tag,
                        size_t index) {
  ReplicaWalk out;
  Rng tree_rng = task_rng(ex.seed, kStreamTree, tag, index);
  auto arena = std::make_unique<TreeArena>(law, tree_rng.next_u64());
  if (arena->proven_finite(wp.finite_budget, 256)) return out;
  ArenaSurface surface(*arena);
  Rng walk_rng = task_rng(ex.seed, kStreamWalk, tag, index);
  out.traj = run_walk(surface, lambda, wp.horizon, TreeArena::kRootParent, walk_rng);
  out.arena = std::move(arena);
  return out;
}

}  // namespace

SpeedEstimate speed_formula(const OffspringLaw& law, double lambda,
                            const SampleParams& sp, const Exec& ex) {
  return ratio_estimate(
      law, lambda, sp, ex, kTagFormula, "formula",
      [lambda](uint32_t nu) { return static_cast<double>(nu) - lambda; },
      [lambda](uint32_t nu) { return static_cast<double>(nu) + lambda; });
}

SpeedEstimate m_lambda(const OffspringLaw& law, double lambda,
                       const SampleParams& sp, const Exec& ex) {
  return ratio_estimate(
      law, lambda, sp, ex, kTagMlambda, "m_lambda",
      [](uint32_t nu) { return static_cast<double>(nu); },
      [](uint32_t) { return 1.0; });
}

SpeedEstimate speed_empirical(const OffspringLaw& law, double lambda,
                              const WalkParams& wp, const Exec& ex) {
  validate_regime(law, lambda);
  if (wp.horizon < 1 || wp.replicas < 1)
    throw SimError("BadArgument", "horizon and replicas must be >= 1");
  std::vector<double> value(wp.replicas);
  std::vector<uint8_t> ok(wp.replicas, 0);
  parallel_for(wp.replicas, ex.workers, [&](size_t r) {
    ReplicaWalk rep = run_replica(law, lambda, wp, ex, kTagEmpirical, r);
    if (!rep.arena) return;
    ok[r] = 1;
    value[r] = static_cast<double>(rep.arena->depth(rep.traj.nodes.back())) /
               static_cast<double>(wp.horizon);
  });
  std::vector<double> accepted;
  for (size_t r = 0; r < wp.replicas; ++r)
    if (ok[r]) accepted.push_back(value[r]);
  if (accepted.empty())
    throw AllReplicasRejectedError("every replica tree was provably finite");
  const MeanStderr ms = mean_stderr(accepted);
  SpeedEstimate est;
  est.value = ms.mean;
  est.stderr_ = ms.stderr_;
  est.n_effective = accepted.size();
  est.method = "empirical";
  est.rejected_replicas = wp.replicas - accepted.size();
  return est;
}

SpeedEstimate speed_regen(const OffspringLaw& law, double lambda,
                          const WalkParams& wp, const Exec& ex) {
  validate_regime(law, lambda);
  struct Block {
    double depth_sum = 0.0;
    double time_sum = 0.0;
    size_t pairs = 0;
    uint8_t ok = 0;
  };
  std::vector<Block> blocks(wp.replicas);
  parallel_for(wp.replicas, ex.workers, [&](size_t r) {
    ReplicaWalk rep = run_replica(law, lambda, wp, ex, kTagRegen, r);
    if (!rep.arena) return;
    Block& blk = blocks[r];
    blk.ok = 1;
    ArenaSurface surface(*rep.arena);
    const EpochList ep =
        regeneration_epochs(surface, rep.traj, wp.effective_tail_buffer());
    for (size_t i = 0; i + 1 < ep.regen.size(); ++i) {
      const size_t l0 = ep.regen[i], l1 = ep.regen[i + 1];
      blk.depth_sum += surface.depth(rep.traj.nodes[l1]) -
                       surface.depth(rep.traj.nodes[l0]);
      blk.time_sum += static_cast<double>(l1 - l0);
      ++blk.pairs;
    }
  });
  size_t rejected = 0, n_pairs = 0, n_blocks = 0;
  std::vector<double> d, t;
  for (const Block& blk : blocks) {
    if (!blk.ok) {
      ++rejected;
      continue;
    }
    ++n_blocks;
    n_pairs += blk.pairs;
    d.push_back(blk.depth_sum);
    t.push_back(blk.time_sum);
  }
  if (n_blocks == 0)
    throw AllReplicasRejectedError("every replica tree was provably finite");
  if (n_pairs == 0)
    throw NoRegenerationsError("no uncensored regeneration pairs in the window");
  const double D = pairwise_sum(d), T = pairwise_sum(t);
  SpeedEstimate est;
  est.value = D / T;
  // Replica-level batching of the pooled ratio.
  double resid = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const double e = d[i] - est.value * t[i];
    resid += e * e;
  }
  const double nb = static_cast<double>(n_blocks);
  est.stderr_ = nb > 1 ? std::sqrt(resid * nb / (nb - 1.0)) / T : 0.0;
  est.n_effective = n_pairs;
  est.method = "regen";
  est.rejected_replicas = rejected;
  return est;
}

SpeedEstimate speed_drift(const OffspringLaw& law, double lambda,
                          const WalkParams& wp, const Exec& ex) {
  validate_regime(law, lambda);
  std::vector<double> value(wp.replicas);
  std::vector<uint8_t> ok(wp.replicas, 0);
  parallel_for(wp.replicas, ex.workers, [&](size_t r) {
    ReplicaWalk rep = run_replica(law, lambda, wp, ex, kTagDrift, r);
    if (!rep.arena) return;
    ok[r] = 1;
    // First half is burn-in toward the stationary environment.
    const size_t from = wp.horizon / 2;
    double sum = 0.0;
    for (size_t k = from; k < wp.horizon; ++k) {
      const uint32_t id = rep.traj.nodes[k];
      const double nu = id == TreeArena::kRootParent
                            ? 1.0
                            : static_cast<double>(rep.arena->child_count(id));
      sum += (nu - lambda) / (nu + lambda);
    }
    value[r] = sum / static_cast<double>(wp.horizon - from);
  });
  std::vector<double> accepted;
  for (size_t r = 0; r < wp.replicas; ++r)
    if (ok[r]) accepted.push_back(value[r]);
  if (accepted.empty())
    throw AllReplicasRejectedError("every replica tree was provably finite");
  const MeanStderr ms = mean_stderr(accepted);
  SpeedEstimate est;
  est.value = ms.mean;
  est.stderr_ = ms.stderr_;
  est.n_effective = accepted.size();
  est.method = "drift";
  est.rejected_replicas = wp.replicas - accepted.size();
  return est;
}

double speed_srw_closed(const OffspringLaw& law) {
  if (law.p0() > 0.0)
    throw SimError("DomainError", "closed form requires a law without leaves");
  double out = 0.0;
  for (const auto& e : law.entries())
    out += e.p * (static_cast<double>(e.k) - 1.0) / (static_cast<double>(e.k) + 1.0);
  return out;
}

FreshRateResult fresh_rate_check(const OffspringLaw& law, double lambda,
                                 const WalkParams& wp, const Exec& ex) {
  validate_regime(law, lambda);
  struct Block {
    double rate = 0.0;
    double gap_pairs = 0.0;
    double gap_time = 0.0;
    uint8_t ok = 0;
  };
  std::vector<Block> blocks(wp.replicas);
  const size_t from = wp.horizon / 2;
  parallel_for(wp.replicas, ex.workers, [&](size_t r) {
    ReplicaWalk rep = run_replica(law, lambda, wp, ex, kTagFreshRate, r);
    if (!rep.arena) return;
    Block& blk = blocks[r];
    blk.ok = 1;
    ArenaSurface surface(*rep.arena);
    const EpochList ep =
        regeneration_epochs(surface, rep.traj, wp.effective_tail_buffer());
    // First return to the root's parent; fresh epochs after it do not count
    // (the renewal limit is joint with "not yet returned").
    size_t first_return = wp.horizon + 1;
    for (size_t i = 1; i < rep.traj.nodes.size(); ++i) {
      if (rep.traj.nodes[i] == TreeArena::kRootParent) {
        first_return = i;
        break;
      }
    }
    size_t count = 0;
    for (size_t i = 0; i < ep.fresh.size(); ++i) {
      const size_t l = ep.fresh[i];
      if (l > from && l <= wp.horizon && l < first_return) ++count;
    }
    blk.rate = static_cast<double>(count) / static_cast<double>(wp.horizon - from);
    for (size_t i = 0; i + 1 < ep.regen.size(); ++i) {
      blk.gap_time += static_cast<double>(ep.regen[i + 1] - ep.regen[i]);
      blk.gap_pairs += 1.0;
    }
  });
  std::vector<double> rates, pairs, times;
  size_t rejected = 0;
  for (const Block& blk : blocks) {
    if (!blk.ok) {
      ++rejected;
      continue;
    }
    rates.push_back(blk.rate);
    pairs.push_back(blk.gap_pairs);
    times.push_back(blk.gap_time);
  }
  if (rates.empty())
    throw AllReplicasRejectedError("every replica tree was provably finite");
  const double total_pairs = pairwise_sum(pairs);
  const double total_time = pairwise_sum(times);
  if (total_pairs < 1.0)
    throw NoRegenerationsError("no uncensored regeneration pairs in the window");

  FreshRateResult out;
  const MeanStderr mr = mean_stderr(rates);
  out.rate = mr.mean;
  out.rate_stderr = mr.stderr_;
  // 1 / mean gap = pairs / time, a pooled ratio over replica batches.
  out.inv_mean_gap = total_pairs / total_time;
  double resid = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const double e = pairs[i] - out.inv_mean_gap * times[i];
    resid += e * e;
  }
  const double nb = static_cast<double>(rates.size());
  out.inv_mean_gap_stderr =
      nb > 1 ? std::sqrt(resid * nb / (nb - 1.0)) / total_time : 0.0;
  out.n_gaps = static_cast<size_t>(total_pairs);
  out.rejected_replicas = rejected;
  return out;
}

}  // namespace gws
