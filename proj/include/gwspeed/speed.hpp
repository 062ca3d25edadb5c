#pragma once

// Speed estimators. Four independent routes to the same constant:
//
//   formula    -- Monte Carlo evaluation of the closed expression in terms of
//                 the offspring count and i.i.d. escape probabilities,
//   empirical  -- final depth over horizon, averaged over surviving replicas,
//   regen      -- depth gained per unit time between regeneration epochs,
//   drift      -- long-run mean of (nu - lambda)/(nu + lambda) at the walker.
//
// Plus the exact unbiased-walk closed form and the effective branching
// number m_lambda of the equivalent regular tree.

#include <cstdint>
#include <string>

#include "gwspeed/common.hpp"
#include "gwspeed/conductance.hpp"
#include "gwspeed/offspring.hpp"
#include "gwspeed/walk.hpp"

namespace gws {

struct SpeedEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  size_t n_effective = 0;
  std::string method;
  size_t rejected_replicas = 0;  // provably extinct trees discarded
};

struct SampleParams {
  size_t n_samples = 20'000;
  double beta_tol = 1e-3;
  size_t beta_budget = 40'000'000;
};

struct WalkParams {
  size_t horizon = 20'000;
  size_t replicas = 400;
  // Regeneration candidates in the last tail_buffer steps are censored;
  // SIZE_MAX means 10% of the horizon.
  size_t tail_buffer = SIZE_MAX;
  // Budget for the extinction pre-check (breadth-first exhaustion).
  size_t finite_budget = 20'000;

  size_t effective_tail_buffer() const {
    return tail_buffer == SIZE_MAX ? horizon / 10 : tail_buffer;
  }
};

SpeedEstimate speed_formula(const OffspringLaw& law, double lambda,
                            const SampleParams& sp, const Exec& ex);

SpeedEstimate speed_empirical(const OffspringLaw& law, double lambda,
                              const WalkParams& wp, const Exec& ex);

SpeedEstimate speed_regen(const OffspringLaw& law, double lambda,
                          const WalkParams& wp, const Exec& ex);

SpeedEstimate speed_drift(const OffspringLaw& law, double lambda,
                          const WalkParams& wp, const Exec& ex);

// Exact closed form for the unbiased walk: sum p_k (k-1)/(k+1). Requires
// p_0 = 0 (with leaves the reduction is not asserted; cross-estimator
// consistency covers that case).
double speed_srw_closed(const OffspringLaw& law);

// Effective branching number of the equivalent regular tree; satisfies
// m_lambda <= m.
SpeedEstimate m_lambda(const OffspringLaw& law, double lambda,
                       const SampleParams& sp, const Exec& ex);

// Two estimators of the renewal rate: the frequency of fresh epochs at large
// times jointly with "the root's parent not yet revisited", and the
// reciprocal mean regeneration gap. They agree in the limit.
struct FreshRateResult {
  double rate = 0.0;
  double rate_stderr = 0.0;
  double inv_mean_gap = 0.0;
  double inv_mean_gap_stderr = 0.0;
  size_t n_gaps = 0;
  size_t rejected_replicas = 0;
};

FreshRateResult fresh_rate_check(const OffspringLaw& law, double lambda,
                                 const WalkParams& wp, const Exec& ex);

}  // namespace gws
