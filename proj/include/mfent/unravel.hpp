#pragma once

// Measurement unravelings: the Upsilon factor selecting the noise statistics
// dZ dZ = Upsilon dt, dZ* dZ = dt, sampled complex noise, and the
// Gaussian coarse-grained jump count of the quantum-jump process.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/rng.hpp"

namespace mfent {

enum class Unraveling { QuantumJump, Homodyne, Heterodyne };

// What to do when the quantum-jump factor is requested at <L> = 0.
enum class QjZeroPolicy { Error, HeterodyneFallback };

struct UnravelingScheme {
  Unraveling tag = Unraveling::Heterodyne;
  QjZeroPolicy qj_zero_policy = QjZeroPolicy::Error;
  double zero_threshold = 1e-12;
};

inline std::string_view to_string(Unraveling u) {
  switch (u) {
    case Unraveling::QuantumJump: return "qj";
    case Unraveling::Homodyne: return "homodyne";
    case Unraveling::Heterodyne: return "heterodyne";
  }
  return "?";
}

inline std::optional<Unraveling> parse_unraveling(std::string_view s) {
  if (s == "qj" || s == "quantum_jump" || s == "jump") return Unraveling::QuantumJump;
  if (s == "homodyne" || s == "homo") return Unraveling::Homodyne;
  if (s == "heterodyne" || s == "het") return Unraveling::Heterodyne;
  return std::nullopt;
}

inline constexpr Unraveling kAllUnravelings[] = {Unraveling::QuantumJump, Unraveling::Homodyne,
                                                  Unraveling::Heterodyne};

/// Upsilon for one channel given its expectation value <L> (any normalization).
inline cplx upsilon(const UnravelingScheme& scheme, cplx l_expect) {
  switch (scheme.tag) {
    case Unraveling::Homodyne: return 1.0;
    case Unraveling::Heterodyne: return 0.0;
    case Unraveling::QuantumJump: {
      const double mod = std::abs(l_expect);
      if (mod < scheme.zero_threshold) {
        if (scheme.qj_zero_policy == QjZeroPolicy::HeterodyneFallback) return 0.0;
        throw UnravelingError("quantum-jump Upsilon undefined: |<L>| = " + std::to_string(mod) +
                              " below threshold");
      }
      const cplx phase = l_expect / mod;
      return phase * phase;
    }
  }
  return 0.0;
}

/// One Ito increment of the complex measurement noise for every channel.
struct NoiseIncrement {
  std::vector<cplx> dz;
  double dt = 0.0;
  // Real Wiener draws behind dz, two per channel (the second is unused unless heterodyne).
  std::vector<double> dw;
};

/// Samples dZ per channel. Draws are keyed by `step`, so the same (rng, step) reproduces them.
inline NoiseIncrement sample_noise(const UnravelingScheme& scheme, std::span<const cplx> l_expect, double dt,
                                   const CounterRng& rng, std::uint64_t step) {
  if (!(dt > 0.0)) throw Error("sample_noise: dt must be positive");
  NoiseIncrement out;
  out.dt = dt;
  out.dz.resize(l_expect.size());
  out.dw.resize(2 * l_expect.size());
  const double sdt = std::sqrt(dt);
  for (std::size_t k = 0; k < l_expect.size(); ++k) {
    const double w1 = sdt * rng.normal(step, 2 * k);
    const double w2 = sdt * rng.normal(step, 2 * k + 1);
    out.dw[2 * k] = w1;
    out.dw[2 * k + 1] = w2;
    switch (scheme.tag) {
      case Unraveling::Homodyne: out.dz[k] = w1; break;
      case Unraveling::Heterodyne: out.dz[k] = cplx(w1, w2) / std::sqrt(2.0); break;
      case Unraveling::QuantumJump: {
        const double mod = std::abs(l_expect[k]);
        if (mod < scheme.zero_threshold) {
          if (scheme.qj_zero_policy == QjZeroPolicy::HeterodyneFallback) {
            out.dz[k] = cplx(w1, w2) / std::sqrt(2.0);
            break;
          }
          throw UnravelingError("quantum-jump noise undefined at <L> = 0 (channel " + std::to_string(k) + ")");
        }
        out.dz[k] = (l_expect[k] / mod) * w1;
        break;
      }
    }
  }
  return out;
}

/// Gaussian stand-in for the number of jumps in a coarse-grained window:
/// mean and variance |<L>|^2 dt, clamped at zero.
inline double coarse_grained_jumps(cplx l_expect, double dt, const CounterRng& rng, std::uint64_t step) {
  if (!(dt > 0.0)) throw Error("coarse_grained_jumps: dt must be positive");
  const double mod = std::abs(l_expect);
  if (mod == 0.0) return 0.0;
  const double dw = std::sqrt(dt) * rng.normal(step);
  return std::max(0.0, mod * mod * dt + mod * dw);
}

}  // namespace mfent
