#pragma once

// Finite-support offspring distributions and the scalar quantities derived
// from them: the mean m, the extinction probability q and the zero-speed
// threshold lambda_c = E[nu q^(nu-1)]. These gate every simulation regime.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gwspeed/common.hpp"

namespace gws {

struct LawEntry {
  uint32_t k = 0;   // offspring count
  double p = 0.0;   // its probability
};

class OffspringLaw {
 public:
  // Validates: probabilities nonnegative, summing to 1 within 1e-12, support
  // points distinct; entries are stored sorted by k.
  static OffspringLaw from_entries(std::vector<LawEntry> entries);

  // Parses the "k:p,k:p" literal used by the CLI and config files.
  static OffspringLaw parse(const std::string& literal);
  std::string format() const;

  std::span<const LawEntry> entries() const { return entries_; }
  uint32_t k_max() const { return entries_.back().k; }
  double mean() const { return mean_; }
  double p0() const;
  double probability_of(uint32_t k) const;

  // Probability generating function f(s) = sum p_k s^k.
  double pgf(double s) const;

  // One draw by inverse CDF; deterministic given the generator state.
  uint32_t sample(Rng& rng) const;

 private:
  std::vector<LawEntry> entries_;
  std::vector<double> cum_;
  double mean_ = 0.0;
};

struct LawStats {
  double m = 0.0;
  double q = 1.0;
  double lambda_c = 0.0;
};

double mean_offspring(const OffspringLaw& law);

// Smallest fixed point of the generating function, found by monotone
// iteration from 0 with stopping rule |s' - s| < tol/2. Returns 1 for
// subcritical and (nondegenerate) critical laws.
double extinction_probability(const OffspringLaw& law, double tol = 1e-12);

// E[nu q^(nu-1)] with the convention 0^0 = 1.
double lambda_c(const OffspringLaw& law, double q);

LawStats law_stats(const OffspringLaw& law);

// Succeeds iff m > 1 and lambda_c < lambda < m; otherwise throws RegimeError
// naming the failed inequality.
LawStats validate_regime(const OffspringLaw& law, double lambda);

inline uint32_t sample_offspring(const OffspringLaw& law, Rng& rng) {
  return law.sample(rng);
}

}  // namespace gws
