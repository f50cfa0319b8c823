#pragma once

// Conditioned pure-state trajectories in a truncated Hilbert space.
//
// Quantum jumps use the waiting-time method: the unnormalized state follows
// H_eff = H - (i/2) sum L^+L until its squared norm falls to a uniform draw r,
// located by bisection inside the step; then a channel is chosen with weight
// |L_k psi|^2 and psi -> L_k psi / |L_k psi|. A fixed-step Bernoulli variant is
// kept for cross-checks.
//
// Diffusive unravelings integrate the normalized stochastic Schroedinger equation
//   dpsi = [-iH - 1/2 sum (L^+L - 2<L>* L + |<L>|^2)] psi dt + sum dZ* (L - <L>) psi
// (density-matrix form: drho = Lrho dt + dZ* G rho + h.c.), with the Ito
// correction 1/2 (dZ*^2 - Upsilon* dt)(L - <L>)^2 psi and explicit renormalization.
// The drift is propagated by a converged Taylor series of the step exponential,
// sub-stepped so that step * |H_eff|_1 <= 2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/exact/space.hpp"
#include "mfent/rng.hpp"
#include "mfent/unravel.hpp"

namespace mfent::exact {

enum class JumpTiming { WaitingTime, FixedStep };

struct TrajectoryOptions {
  double t_max = 1.0;
  double dt_out = 0.1;
  double max_step = 0.0;          // drift sub-step; 0 picks 2 / |H_eff|_1
  double dt = 1e-6;               // diffusive noise step
  double norm_drift_tol = 1e-6;   // largest | |psi| - 1 | per diffusive step before renormalization
  double leakage_tol = 1e-6;      // probability allowed in the top 10% of each Fock cutoff
  JumpTiming timing = JumpTiming::WaitingTime;
  double bisection_tol = 1e-12;   // jump-time resolution (absolute time)
};

/// Called at every output time with the normalized state.
using TrajectoryObserver = std::function<void(int index, double t, const VectorXcd& psi)>;

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<std::int64_t> jumps;  // cumulative jump count at each output time
};

namespace detail {

inline SpMat effective_hamiltonian(const ExactModel& m) {
  SpMat k = m.hamiltonian;
  for (const auto& l : m.jumps) k -= cplx(0.0, 0.5) * SpMat(SpMat(l.adjoint()) * l);
  k.makeCompressed();
  return k;
}

inline std::vector<double> output_times(double t_max, double dt_out) {
  if (!(t_max > 0.0) || !(dt_out > 0.0) || !std::isfinite(t_max)) throw Error("trajectory times must be positive");
  const int n = static_cast<int>(std::llround(t_max / dt_out));
  std::vector<double> ts;
  for (int k = 0; k <= n; ++k) ts.push_back(std::min(t_max, k * dt_out));
  if (ts.back() < t_max * (1 - 1e-12)) ts.push_back(t_max);
  return ts;
}

// psi <- exp(h A) psi by a Taylor series truncated once terms drop below tol |psi|.
template <class Apply>
void taylor_step(const Apply& apply, double h, VectorXcd& psi, VectorXcd& term, double tol = 1e-15) {
  term = psi;
  const double scale = psi.norm();
  for (int k = 1; k <= 60; ++k) {
    term = apply(term) * (h / k);
    psi += term;
    if (term.norm() < tol * scale) break;
  }
}

}  // namespace detail

/// Throws CutoffError when the top 10% of any Fock mode's levels carries more than `tol`.
inline void check_leakage(const Basis& b, const VectorXcd& psi, double tol, double t) {
  if (b.kind != BasisKind::Fock) return;
  const double total = psi.squaredNorm();
  for (int m = 0; m < b.modes(); ++m) {
    const int top = b.cutoffs[m] - std::max(1, b.cutoffs[m] / 10);
    double p = 0.0;
    for (int i = 0; i < b.dim(); ++i)
      if (b.occupation(i, m) >= top) p += std::norm(psi(i));
    if (p > tol * total)
      throw CutoffError("population " + std::to_string(p / total) + " in the top levels of mode " + std::to_string(m) +
                        " at t = " + std::to_string(t) + "; raise the Fock cutoff (now " +
                        std::to_string(b.cutoffs[m]) + ")");
  }
}

inline void check_initial(const ExactModel& m, const VectorXcd& psi0) {
  if (psi0.size() != m.basis.dim()) throw Error("initial state has the wrong dimension");
  if (!psi0.allFinite() || std::abs(psi0.norm() - 1.0) > 1e-10) throw Error("initial state must be normalized");
}

/// Monte Carlo wavefunction trajectory.
inline TrajectoryRecord evolve_qj(const ExactModel& m, VectorXcd psi, const TrajectoryOptions& opts,
                                  const CounterRng& rng, const TrajectoryObserver& observe = {}) {
  check_initial(m, psi);
  const SpMat k_eff = detail::effective_hamiltonian(m);
  const double h_max = opts.max_step > 0.0 ? opts.max_step : 2.0 / std::max(one_norm(k_eff), 1e-300);
  const auto apply = [&](const VectorXcd& x) -> VectorXcd { return cplx(0.0, -1.0) * (k_eff * x); };
  const auto ts = detail::output_times(opts.t_max, opts.dt_out);

  TrajectoryRecord rec;
  std::uint64_t draw = 0;
  double threshold = rng.uniform(draw, 0);
  std::int64_t jumps = 0;
  double t = 0.0;
  VectorXcd trial, term;

  const auto jump = [&]() {
    std::vector<double> w;
    double sum = 0.0;
    for (const auto& l : m.jumps) {
      sum += (l * psi).squaredNorm();
      w.push_back(sum);
    }
    if (!(sum > 0.0)) throw IntegrationError("jump requested with vanishing jump rates", t);
    const double pick = rng.uniform(draw, 1) * sum;
    const std::size_t k = std::min<std::size_t>(std::lower_bound(w.begin(), w.end(), pick) - w.begin(), w.size() - 1);
    psi = m.jumps[k] * psi;
    psi /= psi.norm();
    ++jumps;
    ++draw;
    threshold = rng.uniform(draw, 0);
  };

  for (std::size_t i = 0; i < ts.size(); ++i) {
    while (t < ts[i] - 1e-14) {
      const double h = std::min(h_max, ts[i] - t);
      trial = psi;
      detail::taylor_step(apply, h, trial, term);
      if (opts.timing == JumpTiming::FixedStep) {
        // Jump probability over the step from the start-of-step rates.
        double rate = 0.0;
        for (const auto& l : m.jumps) rate += (l * psi).squaredNorm();
        rate /= psi.squaredNorm();
        psi = trial / trial.norm();
        t += h;
        if (rng.uniform(draw, 2) < rate * h) {
          jump();
        } else {
          ++draw;
        }
        continue;
      }
      if (trial.squaredNorm() > threshold) {
        psi = trial;
        t += h;
        continue;
      }
      // The norm crosses the threshold inside the step: bisect on the sub-step.
      double lo = 0.0, hi = h;
      while (hi - lo > opts.bisection_tol * std::max(1.0, t)) {
        const double mid = 0.5 * (lo + hi);
        trial = psi;
        detail::taylor_step(apply, mid, trial, term);
        (trial.squaredNorm() > threshold ? lo : hi) = mid;
        if (hi - lo < 1e-15 * h) break;
      }
      detail::taylor_step(apply, hi, psi, term);
      t += hi;
      jump();
    }
    t = ts[i];
    const VectorXcd normed = psi / psi.norm();
    if (!normed.allFinite()) throw IntegrationError("state lost its norm", t);
    check_leakage(m.basis, normed, opts.leakage_tol, t);
    rec.times.push_back(t);
    rec.jumps.push_back(jumps);
    if (observe) observe(static_cast<int>(i), t, normed);
  }
  return rec;
}

/// Homodyne or heterodyne trajectory with fixed noise step `opts.dt`.
inline TrajectoryRecord evolve_diffusive(const UnravelingScheme& scheme, const ExactModel& m, VectorXcd psi,
                                         const TrajectoryOptions& opts, const CounterRng& rng,
                                         const TrajectoryObserver& observe = {}) {
  if (scheme.tag == Unraveling::QuantumJump) throw Error("evolve_diffusive needs a homodyne or heterodyne scheme");
  if (!(opts.dt > 0.0)) throw Error("diffusive step dt must be positive");
  check_initial(m, psi);
  const SpMat k_eff = detail::effective_hamiltonian(m);
  const double norm1 = one_norm(k_eff);
  const double h_max = opts.max_step > 0.0 ? opts.max_step : 2.0 / std::max(norm1, 1e-300);
  const auto ts = detail::output_times(opts.t_max, opts.dt_out);
  const cplx ups_conj = std::conj(upsilon(scheme, 1.0));
  const std::size_t nch = m.jumps.size();

  TrajectoryRecord rec;
  std::vector<cplx> lexp(nch);
  std::vector<VectorXcd> lpsi(nch);
  VectorXcd term, g, g2, noise;
  std::uint64_t step = 0;
  double t = 0.0;

  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double span = ts[i] - t;
    const int n = span > 1e-14 ? std::max(1, static_cast<int>(std::ceil(span / opts.dt - 1e-9))) : 0;
    const double dt = n ? span / n : 0.0;
    const int sub = n ? std::max(1, static_cast<int>(std::ceil(dt / h_max))) : 0;
    for (int s = 0; s < n; ++s, ++step) {
      double lnorm2 = 0.0;
      for (std::size_t k = 0; k < nch; ++k) {
        lpsi[k] = m.jumps[k] * psi;
        lexp[k] = psi.dot(lpsi[k]);
        lnorm2 += std::norm(lexp[k]);
      }
      const NoiseIncrement dz = sample_noise(scheme, lexp, dt, rng, step);
      noise = VectorXcd::Zero(psi.size());
      for (std::size_t k = 0; k < nch; ++k) {
        g = lpsi[k] - lexp[k] * psi;
        g2 = m.jumps[k] * g - lexp[k] * g;
        const cplx zc = std::conj(dz.dz[k]);
        noise += zc * g + 0.5 * (zc * zc - ups_conj * dt) * g2;
      }
      const auto apply = [&](const VectorXcd& x) -> VectorXcd {
        VectorXcd y = cplx(0.0, -1.0) * (k_eff * x) - 0.5 * lnorm2 * x;
        for (std::size_t k = 0; k < nch; ++k) y += std::conj(lexp[k]) * (m.jumps[k] * x);
        return y;
      };
      for (int q = 0; q < sub; ++q) detail::taylor_step(apply, dt / sub, psi, term, 1e-12);
      psi += noise;
      const double nrm = psi.norm();
      if (!std::isfinite(nrm)) throw IntegrationError("diffusive step produced a non-finite state", t);
      if (std::abs(nrm - 1.0) > opts.norm_drift_tol)
        throw IntegrationError("norm drift " + std::to_string(std::abs(nrm - 1.0)) + " exceeds " +
                                   std::to_string(opts.norm_drift_tol) + "; reduce dt (now " + std::to_string(dt) + ")",
                               t);
      psi /= nrm;
      t += dt;
    }
    t = ts[i];
    check_leakage(m.basis, psi, opts.leakage_tol, t);
    rec.times.push_back(t);
    rec.jumps.push_back(0);
    if (observe) observe(static_cast<int>(i), t, psi);
  }
  return rec;
}

/// Dispatches on the scheme.
inline TrajectoryRecord evolve(const UnravelingScheme& scheme, const ExactModel& m, const VectorXcd& psi0,
                               const TrajectoryOptions& opts, const CounterRng& rng,
                               const TrajectoryObserver& observe = {}) {
  if (scheme.tag == Unraveling::QuantumJump) return evolve_qj(m, psi0, opts, rng, observe);
  return evolve_diffusive(scheme, m, psi0, opts, rng, observe);
}

}  // namespace mfent::exact
