#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace awe {

/// Seeded pseudo-random stream. Children derived with split() are
/// independent of each other and of the parent, so each purpose (init,
/// shuffling, dropout, negative sampling, synthesis) can be varied alone.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  /// Child stream keyed by a label; does not advance this stream.
  RandomSource split(std::string_view label) const;
  RandomSource split(std::string_view label, std::uint64_t index) const;

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double sigma = 1.0);
  bool bernoulli(double p);
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <class It>
  void shuffle(It first, It last) {
    // Fisher-Yates driven by index() so the permutation does not depend on
    // the standard library's shuffle implementation.
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = index(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace awe
