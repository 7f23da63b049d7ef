#pragma once

// Random number plumbing. The engine is std::mt19937_64 (published check
// value: the 10000th output of a default-constructed engine is
// 9981545732273789042). Stream seeds are derived with SplitMix64, and the
// integer/real conversions below are spelled out so results do not depend on
// the standard library's distribution implementations.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace aamatch {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream identified by (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, bound), bound > 0. Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below(0)");
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x > limit);
    return x % bound;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  /// Uniformly random k-subset of {0..n-1}, in draw order.
  std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t k) {
    if (k > n) throw std::invalid_argument("sample_distinct: k > n");
    std::vector<std::uint32_t> pool(n);
    for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
    for (std::uint32_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + below(n - i)]);
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

/// Draws indices from a fixed discrete distribution by inverting the
/// cumulative weights. Zero-weight entries are never drawn.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> weights) : cumulative_(weights.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0)) throw std::invalid_argument("negative or NaN weight");
      acc += weights[i];
      cumulative_[i] = acc;
      if (weights[i] > 0.0) ++positive_;
    }
    if (acc <= 0.0) throw std::invalid_argument("weights sum to zero");
  }

  std::size_t size() const noexcept { return cumulative_.size(); }
  std::size_t positive_count() const noexcept { return positive_; }

  std::uint32_t draw(Rng& rng) const {
    const double total = cumulative_.back();
    for (;;) {
      const double u = rng.uniform01() * total;
      // First index whose cumulative weight exceeds u; zero-weight entries
      // share the previous cumulative value and are skipped.
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      if (it != cumulative_.end()) return static_cast<std::uint32_t>(it - cumulative_.begin());
    }
  }

 private:
  std::vector<double> cumulative_;
  std::size_t positive_ = 0;
};

}  // namespace aamatch
