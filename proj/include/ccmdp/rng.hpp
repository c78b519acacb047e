#pragma once

// Deterministic counter-based random streams.
//
// Every stochastic routine in the library draws from a CounterRng keyed by
// (seed, stream labels...). Forking a child stream is a pure function of the
// parent key and the label, so results are reproducible independent of
// evaluation order and of the platform's <random> distributions (which are
// implementation-defined and therefore never used here).

#include <cmath>
#include <cstdint>

namespace ccmdp {

namespace detail {

// SplitMix64 finalizer: the standard 64-bit avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(detail::mix64(seed)) {}

  // Independent child stream labeled by `label`. Pure: fork(x) on equal
  // parents yields equal children regardless of draw history.
  CounterRng fork(std::uint64_t label) const {
    CounterRng child(0);
    child.key_ = detail::mix64(key_ ^ (0xd1b54a32d192ed03ULL + label * 0x2545f4914f6cdd1dULL));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on (0, 1]: 53-bit mantissa, never returns exactly 0.
  double uniform01() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 1.0) * (1.0 / 9007199254740992.0);
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * (uniform01() - 0x1p-53); }

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    // Multiply-shift; bias is < 2^-32 for desk-scale n, irrelevant here and
    // fully deterministic.
    return static_cast<int>((next_u64() >> 32) * static_cast<std::uint64_t>(n) >> 32);
  }

  // Standard normal via Box-Muller (explicit formulas for portability).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ccmdp
