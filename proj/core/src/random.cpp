#include "awe/random.hpp"

#include <cmath>
#include <numbers>

#include "awe/error.hpp"

namespace awe {

namespace {

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

RandomSource RandomSource::split(std::string_view label) const {
  return RandomSource(mix64(seed_ ^ mix64(hash_label(label))));
}

RandomSource RandomSource::split(std::string_view label, std::uint64_t index) const {
  return RandomSource(mix64(seed_ ^ mix64(hash_label(label) + mix64(index))));
}

double RandomSource::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RandomSource::normal(double mean, double sigma) {
  // Box-Muller, one variate per call.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + sigma * z;
}

bool RandomSource::bernoulli(double p) { return uniform() < p; }

std::size_t RandomSource::index(std::size_t n) {
  if (n == 0) throw InvalidInput("RandomSource::index: empty range");
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    const unsigned __int128 m = static_cast<unsigned __int128>(r) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::size_t>(m >> 64);
  }
}

}  // namespace awe
