#include "gwspeed/offspring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gws {

namespace {

std::string format_double(double v) {
  char buf[32];
  int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char cand[32];
    std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(cand, "%lf", &back);
    if (back == v) return cand;
  }
  return std::string(buf, static_cast<size_t>(len));
}

}  // namespace

OffspringLaw OffspringLaw::from_entries(std::vector<LawEntry> entries) {
  if (entries.empty()) throw SimError("LawInvalid", "offspring law needs at least one entry");
  std::sort(entries.begin(), entries.end(),
            [](const LawEntry& a, const LawEntry& b) { return a.k < b.k; });
  double total = 0.0;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].p < 0.0)
      throw SimError("LawInvalid", "negative probability in offspring law");
    if (i > 0 && entries[i].k == entries[i - 1].k)
      throw SimError("LawInvalid", "duplicate support point in offspring law");
    total += entries[i].p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw SimError("LawInvalid", "offspring law probabilities must sum to 1");

  OffspringLaw law;
  law.entries_ = std::move(entries);
  law.cum_.reserve(law.entries_.size());
  double acc = 0.0, mean = 0.0;
  for (const auto& e : law.entries_) {
    acc += e.p;
    law.cum_.push_back(acc);
    mean += static_cast<double>(e.k) * e.p;
  }
  law.cum_.back() = 1.0;
  law.mean_ = mean;
  return law;
}

OffspringLaw OffspringLaw::parse(const std::string& literal) {
  std::vector<LawEntry> entries;
  std::stringstream ss(literal);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw SimError("LawSyntax", "law literal entry '" + item + "' is not k:p");
    unsigned long k = 0;
    auto [kp, kec] = std::from_chars(item.data(), item.data() + colon, k);
    if (kec != std::errc() || kp != item.data() + colon)
      throw SimError("LawSyntax", "bad count in law literal entry '" + item + "'");
    double p = 0.0;
    try {
      size_t used = 0;
      p = std::stod(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw SimError("LawSyntax", "bad probability in law literal entry '" + item + "'");
    }
    entries.push_back({static_cast<uint32_t>(k), p});
  }
  if (entries.empty()) throw SimError("LawSyntax", "empty law literal");
  return from_entries(std::move(entries));
}

std::string OffspringLaw::format() const {
  std::string out;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(entries_[i].k);
    out.push_back(':');
    out += format_double(entries_[i].p);
  }
  return out;
}

double OffspringLaw::p0() const {
  return entries_.front().k == 0 ? entries_.front().p : 0.0;
}

double OffspringLaw::probability_of(uint32_t k) const {
  for (const auto& e : entries_)
    if (e.k == k) return e.p;
  return 0.0;
}

double OffspringLaw::pgf(double s) const {
  double out = 0.0;
  for (const auto& e : entries_) out += e.p * std::pow(s, static_cast<double>(e.k));
  return out;
}

uint32_t OffspringLaw::sample(Rng& rng) const {
  const double u = rng.next_double();
  for (size_t i = 0; i < cum_.size(); ++i)
    if (u < cum_[i]) return entries_[i].k;
  return entries_.back().k;
}

double mean_offspring(const OffspringLaw& law) { return law.mean(); }

double extinction_probability(const OffspringLaw& law, double tol) {
  if (tol <= 0.0) throw SimError("BadArgument", "extinction tolerance must be positive");
  // Degenerate unary law: every vertex has one child, the tree never dies.
  if (law.probability_of(1) == 1.0) return 0.0;
  if (law.mean() <= 1.0) return 1.0;
  double s = 0.0;
  for (int iter = 0; iter < 100000000; ++iter) {
    const double next = law.pgf(s);
    if (std::abs(next - s) < tol / 2.0) return next;
    s = next;
  }
  return s;
}

double lambda_c(const OffspringLaw& law, double q) {
  double out = 0.0;
  for (const auto& e : law.entries()) {
    if (e.k == 0) continue;
    // 0^0 := 1 covers the nu = 1 term at q = 0.
    const double qpow = (e.k == 1) ? 1.0 : std::pow(q, static_cast<double>(e.k - 1));
    out += static_cast<double>(e.k) * qpow * e.p;
  }
  return out;
}

LawStats law_stats(const OffspringLaw& law) {
  LawStats st;
  st.m = law.mean();
  st.q = extinction_probability(law);
  st.lambda_c = lambda_c(law, st.q);
  return st;
}

LawStats validate_regime(const OffspringLaw& law, double lambda) {
  LawStats st = law_stats(law);
  if (!(st.m > 1.0))
    throw RegimeError(RegimeError::Kind::Subcritical,
                      "mean offspring " + std::to_string(st.m) + " is not > 1");
  if (!(lambda > st.lambda_c))
    throw RegimeError(RegimeError::Kind::ZeroSpeed,
                      "lambda " + std::to_string(lambda) + " is <= lambda_c " +
                          std::to_string(st.lambda_c));
  if (!(lambda < st.m))
    throw RegimeError(RegimeError::Kind::NonTransient,
                      "lambda " + std::to_string(lambda) + " is >= m " + std::to_string(st.m));
  return st;
}

}  // namespace gws
