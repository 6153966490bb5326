#pragma once

#include <cmath>
#include <cstdint>

namespace abstrakt {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so runs are reproducible regardless of call
// order across streams. The mixer is splitmix64 applied to the packed
// counter; normals come from Box-Muller on consecutive uniforms.
class CounterRng {
public:
  explicit CounterRng(uint64_t seed, uint64_t stream = 0)
      : seed_(seed), stream_(stream), counter_(0) {}

  uint64_t next_u64() {
    uint64_t z = seed_ ^ mix(stream_ + 0x9e3779b97f4a7c15ULL);
    z += mix(counter_++);
    return mix(z);
  }

  /// Uniform on (0, 1]; never returns 0 so log() is safe.
  double next_double() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * (next_double() - 0x1.0p-53); }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * next_normal(); }

  uint64_t counter() const { return counter_; }

private:
  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace abstrakt
