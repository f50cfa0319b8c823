#pragma once

// Counter-based random streams. A draw is a pure function of
// (master seed, trajectory, channel, step, lane), so results do not depend on
// scheduling or on how many draws other streams consumed.

#include <cmath>
#include <cstdint>

#include "mfent/core.hpp"

namespace mfent {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t trajectory = 0, std::uint64_t channel = 0)
      : key_(splitmix64(splitmix64(splitmix64(seed) ^ trajectory) + 0x632BE59BD9B4E019ull * (channel + 1))) {}

  constexpr std::uint64_t bits(std::uint64_t step, std::uint64_t lane = 0) const {
    return splitmix64(splitmix64(key_ ^ (step * 0xD1B54A32D192ED03ull)) + lane * 0x8CB92BA72F3D8DD7ull);
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t step, std::uint64_t lane = 0) const {
    return (static_cast<double>(bits(step, lane) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two lanes of the same counter.
  double normal(std::uint64_t step, std::uint64_t lane = 0) const {
    const double u1 = uniform(step, 2 * lane);
    const double u2 = uniform(step, 2 * lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  CounterRng substream(std::uint64_t channel) const {
    CounterRng r{0};
    r.key_ = splitmix64(key_ + 0x9E3779B97F4A7C15ull * (channel + 1));
    return r;
  }

 private:
  std::uint64_t key_;
};

}  // namespace mfent
