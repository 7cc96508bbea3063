#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace secdb {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic 64-bit RNG. std::mt19937_64 with hand-rolled draw helpers so
// that sequences do not depend on the standard library's distribution
// implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed)) {}

  // Derive an independent stream for (seed, stream_id) without sharing state.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(splitmix(seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1))));
  }

  std::uint64_t next_u64() {
    // xorshift* keeps the generator tiny and fully portable
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::next_below: n must be positive");
    // rejection sampling removes modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    x = x ^ (x >> 31);
    return x ? x : 0x1ULL;
  }

  std::uint64_t state_;
};

// Run fn(i) for i in [0, n) on `workers` threads. Results must be written to
// pre-sized slots indexed by i so the outcome is independent of scheduling.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int nthreads = int(std::min<std::size_t>(std::size_t(workers), n));
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed) std::rethrow_exception(first_error);
}

// Round-trip-safe double formatting used by every exporter, so that identical
// values always serialize to identical bytes.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace secdb
