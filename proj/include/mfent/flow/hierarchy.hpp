#pragma once

// Two-stage integration that mirrors the structure of the thermodynamic-limit
// equations: the mean field evolves on its own, the covariances are driven by it.
// The mean field is stepped first with dense output; the covariance stepper then
// reads the mean field off that path. The mean-field trajectory is therefore the
// same whether or not covariances are integrated alongside it.

#include <algorithm>
#include <functional>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/ode.hpp"

namespace mfent::flow {

struct FlowOptions {
  ode::Options ode{};
  // Symplectic eigenvalues may undershoot 1/2 by physicality_rel * (1 + |v|) before aborting;
  // large occupations near critical points cost digits.
  double physicality_rel = 1e-6;
};

class MeanFieldPath {
 public:
  using Segment = ode::DormandPrince<VectorXd>::Segment;

  void push(const Segment& s) { segs_.push_back(s); }
  bool empty() const { return segs_.empty(); }

  VectorXd operator()(double t) const {
    if (segs_.empty()) return constant_;
    auto it = std::upper_bound(segs_.begin(), segs_.end(), t, [](double x, const Segment& s) { return x < s.t0; });
    if (it != segs_.begin()) --it;
    return (*it)(std::clamp(t, it->t0, it->t1()));
  }

  void set_constant(VectorXd x) { constant_ = std::move(x); }

 private:
  std::vector<Segment> segs_;
  VectorXd constant_;
};

using MeanFieldRhs = std::function<void(double, const VectorXd&, VectorXd&)>;
// Optional projection after each accepted mean-field step; returns true if it changed x.
using MeanFieldProjection = std::function<bool(VectorXd&)>;
using CovarianceRhs = std::function<void(double, const VectorXd& x, const VectorXd& y, VectorXd& dy)>;

/// Mean-field stage alone: states at each of the output `times` (sorted, first >= t0).
inline std::vector<VectorXd> integrate_mean_field(const MeanFieldRhs& f, const MeanFieldProjection& project, VectorXd x,
                                                  double t0, const std::vector<double>& times,
                                                  const ode::Options& opts, MeanFieldPath* path = nullptr) {
  ode::DormandPrince<VectorXd> st(f, opts);
  st.enable_dense_output(path != nullptr);
  if (path) path->set_constant(x);
  std::vector<VectorXd> out;
  double t = t0;
  for (double tout : times) {
    t = st.advance(t, tout, x, [&](double, VectorXd& y) {
      if (path) path->push(st.segment());
      if (project && project(y)) st.mark_projected();
      return true;
    });
    out.push_back(x);
  }
  return out;
}

/// Full hierarchy; `observer(t, x, y)` sees the mean field and covariance block at each output time.
template <class Observer>
void integrate_hierarchy(const MeanFieldRhs& f_mf, const MeanFieldProjection& project, const VectorXd& x0,
                         const CovarianceRhs& f_cov, VectorXd y, double t0, const std::vector<double>& times,
                         Observer&& observer, const ode::Options& opts) {
  MeanFieldPath path;
  const std::vector<VectorXd> xs = integrate_mean_field(f_mf, project, x0, t0, times, opts, &path);
  ode::DormandPrince<VectorXd> st([&](double t, const VectorXd& yy, VectorXd& dy) { f_cov(t, path(t), yy, dy); },
                                  opts);
  double t = t0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    t = st.advance(t, times[k], y);
    observer(times[k], xs[k], y);
  }
}

/// Output grid 0, dt, 2 dt, ..., t_max (t_max always included).
inline std::vector<double> output_times(double t_max, double dt_out) {
  if (!(t_max > 0.0)) throw Error("integration needs t_max > 0");
  if (!(dt_out > 0.0)) throw Error("integration needs dt_out > 0");
  std::vector<double> ts;
  const long n = static_cast<long>(std::floor(t_max / dt_out + 1e-9));
  for (long k = 0; k <= n; ++k) ts.push_back(std::min(t_max, k * dt_out));
  if (t_max - ts.back() > 1e-12 * t_max) ts.push_back(t_max);
  return ts;
}

}  // namespace mfent::flow
