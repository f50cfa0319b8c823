#pragma once

// Adaptive Dormand-Prince 5(4) integrator for smooth ODE systems y' = f(t, y).
// The state type is any Eigen column vector (real or complex).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mfent/core.hpp"

namespace mfent::ode {

struct Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0: choose automatically
  double min_step = 1e-13;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

namespace detail {

// Butcher tableau of DOPRI5.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// Continuous extension (4th order dense output).
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace detail

/// Embedded 5(4) Runge-Kutta stepper with FSAL and PI-free classic step control.
///
/// `Vec` is an Eigen vector type. The right-hand side is called as
/// `f(t, y, dydt)` and must size `dydt` like `y`.
template <class Vec>
class DormandPrince {
 public:
  using Rhs = std::function<void(double, const Vec&, Vec&)>;

  DormandPrince(Rhs f, Options opts = {}) : f_(std::move(f)), opts_(opts) {}

  const Stats& stats() const { return stats_; }
  const Options& options() const { return opts_; }

  /// Advances `y` from `t` to exactly `t_end`. `after_step(t, y)` runs after every accepted
  /// step and may modify `y` (projection); it returns false to stop early.
  template <class AfterStep>
  double advance(double t, double t_end, Vec& y, AfterStep&& after_step) {
    if (t_end <= t) return t;
    if (!have_k1_ || t != t_fsal_) {
      k1_.resize(y.size());
      f_(t, y, k1_);
      ++stats_.evaluations;
      have_k1_ = true;
    }
    if (h_ <= 0.0) h_ = initial_step(t, y, t_end - t);

    while (t < t_end) {
      if (stats_.accepted + stats_.rejected >= opts_.max_steps)
        throw IntegrationError("ODE step budget exhausted", t);
      bool last = false;
      double h = std::min(h_, opts_.max_step);
      if (t + h >= t_end || t + 1.01 * h >= t_end) {
        h = t_end - t;
        last = true;
      }
      const double err = try_step(t, y, h);
      if (!std::isfinite(err)) {
        ++stats_.rejected;
        h_ = 0.25 * h;
        if (h_ < opts_.min_step) throw IntegrationError("non-finite state during integration", t);
        continue;
      }
      if (err <= 1.0) {
        ++stats_.accepted;
        if (dense_) record_segment(t, y, h);
        t = last ? t_end : t + h;
        y = y_new_;
        std::swap(k1_, k7_);
        t_fsal_ = t;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h_ = h * fac;
        if (!after_step(t, y)) {
          // The caller may have changed y; derivative cache is stale.
          have_k1_ = false;
          return t;
        }
        if (projected_) {
          f_(t, y, k1_);
          ++stats_.evaluations;
          projected_ = false;
        }
      } else {
        ++stats_.rejected;
        h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
        if (h_ < opts_.min_step) throw IntegrationError("step size underflow (stiff or singular system)", t);
      }
    }
    return t;
  }

  double advance(double t, double t_end, Vec& y) {
    return advance(t, t_end, y, [](double, Vec&) { return true; });
  }

  /// Dense-output polynomial over one accepted step.
  struct Segment {
    double t0 = 0.0, h = 0.0;
    Vec r1, r2, r3, r4, r5;
    double t1() const { return t0 + h; }
    Vec operator()(double t) const {
      const double s = (t - t0) / h, s1 = 1.0 - s;
      return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
    }
  };

  /// When enabled, `segment()` describes the most recent accepted step inside `advance`.
  void enable_dense_output(bool on = true) { dense_ = on; }
  const Segment& segment() const { return seg_; }

  /// Call from `after_step` when `y` was modified so the FSAL derivative is recomputed.
  void mark_projected() { projected_ = true; }

  /// Forget cached derivative data (state was changed externally).
  void reset() {
    have_k1_ = false;
    h_ = 0.0;
  }

  // Cubic Hermite interpolant over the last accepted step, for event location.
  struct LastStep {
    double t0, t1;
    Vec y0, y1, f0, f1;
    Vec operator()(double t) const {
      const double h = t1 - t0;
      const double s = (t - t0) / h;
      const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
      const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
      return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
    }
  };

  /// Single adaptive step toward at most `t_end`, recording data for interpolation.
  double step_once(double t, double t_end, Vec& y, LastStep& rec) {
    if (!have_k1_ || t != t_fsal_) {
      k1_.resize(y.size());
      f_(t, y, k1_);
      ++stats_.evaluations;
      have_k1_ = true;
    }
    if (h_ <= 0.0) h_ = initial_step(t, y, t_end - t);
    for (;;) {
      if (stats_.accepted + stats_.rejected >= opts_.max_steps)
        throw IntegrationError("ODE step budget exhausted", t);
      double h = std::min(h_, opts_.max_step);
      bool last = false;
      if (t + 1.01 * h >= t_end) {
        h = t_end - t;
        last = true;
      }
      const double err = try_step(t, y, h);
      if (std::isfinite(err) && err <= 1.0) {
        ++stats_.accepted;
        rec.t0 = t;
        rec.y0 = y;
        rec.f0 = k1_;
        t = last ? t_end : t + h;
        rec.t1 = t;
        rec.y1 = y_new_;
        rec.f1 = k7_;
        y = y_new_;
        std::swap(k1_, k7_);
        t_fsal_ = t;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h_ = h * fac;
        return t;
      }
      ++stats_.rejected;
      h_ = std::isfinite(err) ? h * std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25 * h;
      if (h_ < opts_.min_step) throw IntegrationError("step size underflow (stiff or singular system)", t);
    }
  }

 private:
  double try_step(double t, const Vec& y, double h) {
    using namespace detail;
    const auto n = y.size();
    k2_.resize(n), k3_.resize(n), k4_.resize(n), k5_.resize(n), k6_.resize(n), k7_.resize(n);
    tmp_ = y + h * a21 * k1_;
    f_(t + c2 * h, tmp_, k2_);
    tmp_ = y + h * (a31 * k1_ + a32 * k2_);
    f_(t + c3 * h, tmp_, k3_);
    tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    f_(t + c4 * h, tmp_, k4_);
    tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    f_(t + c5 * h, tmp_, k5_);
    tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    f_(t + h, tmp_, k6_);
    y_new_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
    f_(t + h, y_new_, k7_);
    stats_.evaluations += 6;
    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(y_new_[i]));
      const double r = std::abs(err_[i]) / sc;
      acc += r * r;
    }
    return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
  }

  void record_segment(double t, const Vec& y, double h) {
    using namespace detail;
    seg_.t0 = t;
    seg_.h = h;
    seg_.r1 = y;
    seg_.r2 = y_new_ - y;
    seg_.r3 = h * k1_ - seg_.r2;
    seg_.r4 = seg_.r2 - h * k7_ - seg_.r3;
    seg_.r5 = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
  }

  double initial_step(double t, const Vec& y, double span) {
    if (opts_.initial_step > 0.0) return std::min(opts_.initial_step, span);
    // Hairer-Norsett-Wanner starting step heuristic.
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opts_.atol + opts_.rtol * std::abs(y[i]);
      d0 += std::norm(y[i] / sc);
      d1 += std::norm(k1_[i] / sc);
    }
    const double n = std::max<double>(1.0, static_cast<double>(y.size()));
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    tmp_ = y + h0 * k1_;
    k2_.resize(y.size());
    f_(t + h0, tmp_, k2_);
    ++stats_.evaluations;
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opts_.atol + opts_.rtol * std::abs(y[i]);
      d2 += std::norm((k2_[i] - k1_[i]) / sc);
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                               : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::min({100.0 * h0, h1, span});
  }

  Rhs f_;
  Options opts_;
  Stats stats_;
  Vec k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y_new_, err_;
  double h_ = 0.0;
  double t_fsal_ = std::numeric_limits<double>::quiet_NaN();
  bool have_k1_ = false;
  bool projected_ = false;
  bool dense_ = false;
  Segment seg_;
};

/// Integrates from `t0` and reports the state at each of the sorted `times`
/// (`observer(t, y)`), stepping exactly onto every output time.
template <class Vec, class Observer>
Stats integrate(typename DormandPrince<Vec>::Rhs f, Vec y, double t0, const std::vector<double>& times,
                Observer&& observer, const Options& opts = {}) {
  DormandPrince<Vec> stepper(std::move(f), opts);
  double t = t0;
  for (double tout : times) {
    if (tout < t) continue;
    t = stepper.advance(t, tout, y);
    observer(t, y);
  }
  return stepper.stats();
}

}  // namespace mfent::ode
