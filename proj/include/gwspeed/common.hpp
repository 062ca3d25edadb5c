#pragma once

// Shared basics: typed errors, deterministic RNG streams, tree labels
// (words), and the small numeric helpers used across the library.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gws {

// ============================================================================
// Errors
// ============================================================================

// Base for everything the library throws on contract violations. `code` is a
// stable machine-readable tag echoed by the CLI error JSON.
class SimError : public std::runtime_error {
 public:
  SimError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class RegimeError : public SimError {
 public:
  enum class Kind { Subcritical, ZeroSpeed, NonTransient };
  RegimeError(Kind kind, const std::string& what)
      : SimError("RegimeError", what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }
  const char* kind_name() const noexcept {
    switch (kind_) {
      case Kind::Subcritical: return "subcritical";
      case Kind::ZeroSpeed: return "zero-speed";
      default: return "non-transient";
    }
  }

 private:
  Kind kind_;
};

struct NotInTreeError : SimError {
  explicit NotInTreeError(const std::string& what) : SimError("NotInTree", what) {}
};
struct InvalidPathError : SimError {
  explicit InvalidPathError(const std::string& what) : SimError("InvalidPath", what) {}
};
struct UndefinedVertexError : SimError {
  explicit UndefinedVertexError(const std::string& what) : SimError("Undefined", what) {}
};
struct DepthBudgetError : SimError {
  explicit DepthBudgetError(const std::string& what) : SimError("DepthBudgetExceeded", what) {}
};
struct EnumerationBudgetError : SimError {
  explicit EnumerationBudgetError(const std::string& what) : SimError("EnumerationBudget", what) {}
};
struct DegenerateDenominatorError : SimError {
  explicit DegenerateDenominatorError(const std::string& what)
      : SimError("DegenerateDenominator", what) {}
};
struct NonpositiveDenominatorError : SimError {
  explicit NonpositiveDenominatorError(const std::string& what)
      : SimError("NonpositiveDenominator", what) {}
};
struct NoRegenerationsError : SimError {
  explicit NoRegenerationsError(const std::string& what) : SimError("NoRegenerations", what) {}
};
struct AllReplicasRejectedError : SimError {
  explicit AllReplicasRejectedError(const std::string& what)
      : SimError("AllReplicasRejected", what) {}
};
struct SingularSystemError : SimError {
  explicit SingularSystemError(const std::string& what) : SimError("SingularSystem", what) {}
};
struct InsufficientSamplesError : SimError {
  explicit InsufficientSamplesError(const std::string& what)
      : SimError("InsufficientSamples", what) {}
};

// ============================================================================
// Deterministic randomness
// ============================================================================

// 64-bit mix (splitmix64 finalizer). Used both to derive independent streams
// from (seed, label) pairs and as the per-node randomness key of tree arenas.
constexpr uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

// Stream labels. Replica count changes must never perturb unrelated streams,
// so every purpose gets its own label and replicas are mixed in per index.
enum : uint64_t {
  kStreamTree = 0x7472656531ULL,
  kStreamWalk = 0x77616c6b31ULL,
  kStreamSample = 0x73616d7031ULL,
};

// splitmix64 generator. Small state, full 64-bit output, reproducible across
// platforms (std:: distributions are implementation-defined, so we do not use
// them anywhere).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in {0, ..., n-1}; rejection keeps it unbiased.
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // A statistically independent generator; does not advance this one.
  Rng fork(uint64_t label) const { return Rng(mix64(state_, label)); }

 private:
  uint64_t state_;
};

inline Rng stream_rng(uint64_t seed, uint64_t stream, uint64_t index) {
  return Rng(mix64(mix64(seed, stream), index));
}

// ============================================================================
// Words: labels of tree vertices
// ============================================================================

// A vertex label is a sequence of positive letters; the root is the empty
// word. The artificial parent of the root is represented by Site::star().
using Letter = uint32_t;
using Word = std::vector<Letter>;

inline Word word_parent(const Word& w) { return Word(w.begin(), w.end() - 1); }

inline Word word_child(const Word& w, Letter letter) {
  Word c = w;
  c.push_back(letter);
  return c;
}

inline Word word_reversed(const Word& w) { return Word(w.rbegin(), w.rend()); }

// Ancestor of w at generation |w| - k (k letters removed from the end).
inline Word word_ancestor(const Word& w, size_t k) {
  return Word(w.begin(), w.end() - static_cast<ptrdiff_t>(k));
}

// True iff a is a proper prefix of b (a a strict ancestor of b).
inline bool word_is_strict_ancestor(const Word& a, const Word& b) {
  return a.size() < b.size() && std::equal(a.begin(), a.end(), b.begin());
}

inline bool word_is_ancestor_or_equal(const Word& a, const Word& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

std::string word_format(const Word& w);              // "e" or "1.2.1"
Word word_parse(const std::string& text);            // inverse of word_format

// A word or the artificial parent of the root.
struct Site {
  bool star = false;  // true: the parent of the root
  Word w;

  static Site root_parent() { return Site{true, {}}; }
  static Site of(Word word) { return Site{false, std::move(word)}; }
  static Site root() { return Site{false, {}}; }

  int depth() const { return star ? -1 : static_cast<int>(w.size()); }

  friend bool operator==(const Site& a, const Site& b) {
    return a.star == b.star && (a.star || a.w == b.w);
  }
  friend auto operator<=>(const Site& a, const Site& b) {
    if (a.star != b.star) return a.star ? std::strong_ordering::less : std::strong_ordering::greater;
    return a.w <=> b.w;
  }
};

std::string site_format(const Site& s);  // "e*", "e" or "1.2.1"

// ============================================================================
// Numerics
// ============================================================================

// Pairwise summation over a fixed index order; the reduction used to merge
// replica results is therefore identical for any worker count.
double pairwise_sum(std::span<const double> xs);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  size_t n = 0;
};

MeanStderr mean_stderr(std::span<const double> xs);

// Stderr of the ratio mean(a)/mean(b) by the delta method with the joint
// empirical covariance of the summands.
double ratio_stderr(std::span<const double> a, std::span<const double> b,
                    double ratio);

// Runs fn(i) for i in [0, n) on `workers` threads. Each index must be an
// independent pure task; results have to be written into pre-sized slots so
// that the outcome is schedule-independent.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn);

// Execution policy shared by the Monte Carlo drivers. Results are identical
// for any worker count: replica work is a pure function of (seed, index) and
// reductions run in index order.
struct Exec {
  uint64_t seed = 1;
  int workers = 1;
};

}  // namespace gws
