#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfc {

// Counter-based generator: SplitMix64 finalizer applied to (key, counter).
// The key is derived once from (seed, stream); every draw is a pure function
// of (key, counter), so sample streams are reproducible across platforms and
// independent of threading as long as (seed, stream, counter) match.
//
// Draw protocol, fixed for reproducibility:
//   uniform()  consumes one counter tick, returns a double in [2^-54, 1).
//   normal()   consumes two ticks (Box-Muller, cosine branch, no caching).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(derive_key(seed, stream)) {}

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    // Two finalizer rounds keep distinct (seed, stream) pairs decorrelated.
    return finalize(finalize(seed + 0x9e3779b97f4a7c15ull * (stream + 1)) ^ stream);
  }

  std::uint64_t next_u64() { return finalize(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // 53-bit mantissa, offset half a ulp so 0 is never returned.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by rejection-free scaled draw; n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::uint64_t counter() const { return counter_; }
  void skip_to(std::uint64_t counter) { counter_ = counter; }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mfc
