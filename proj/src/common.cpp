#include "gwspeed/common.hpp"

#include <atomic>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <mutex>

namespace gws {

std::string word_format(const Word& w) {
  if (w.empty()) return "e";
  std::string out;
  for (size_t i = 0; i < w.size(); ++i) {
    if (i) out.push_back('.');
    out += std::to_string(w[i]);
  }
  return out;
}

Word word_parse(const std::string& text) {
  if (text == "e" || text.empty()) return {};
  Word w;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t dot = text.find('.', pos);
    if (dot == std::string::npos) dot = text.size();
    unsigned long v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + dot, v);
    if (ec != std::errc() || ptr != text.data() + dot || v == 0)
      throw SimError("WordSyntax", "bad word literal: '" + text + "'");
    w.push_back(static_cast<Letter>(v));
    pos = dot + 1;
  }
  return w;
}

std::string site_format(const Site& s) { return s.star ? "e*" : word_format(s.w); }

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr out;
  out.n = xs.size();
  if (out.n == 0) return out;
  out.mean = pairwise_sum(xs) / static_cast<double>(out.n);
  if (out.n < 2) return out;
  std::vector<double> sq(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

double ratio_stderr(std::span<const double> a, std::span<const double> b,
                    double ratio) {
  const size_t n = a.size();
  if (n < 2 || b.size() != n) return 0.0;
  const double ma = pairwise_sum(a) / static_cast<double>(n);
  const double mb = pairwise_sum(b) / static_cast<double>(n);
  std::vector<double> saa(n), sbb(n), sab(n);
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa[i] = da * da;
    sbb[i] = db * db;
    sab[i] = da * db;
  }
  const double denom = static_cast<double>(n - 1);
  const double vaa = pairwise_sum(saa) / denom;
  const double vbb = pairwise_sum(sbb) / denom;
  const double vab = pairwise_sum(sab) / denom;
  const double var =
      (vaa - 2.0 * ratio * vab + ratio * ratio * vbb) / (mb * mb * static_cast<double>(n));
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nthreads = static_cast<int>(std::min<size_t>(static_cast<size_t>(workers), n));
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(nthreads));
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n || failed.load(std::memory_order_relaxed)) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mu);
          if (!error) error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gws
