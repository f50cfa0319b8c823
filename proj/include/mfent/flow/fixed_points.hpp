#pragma once

// Stationary points of the thermodynamic-limit flow and their linear stability.
//
// Roots are found hierarchically, as the equations are: the mean field by damped Newton,
// then the covariance block by relaxing the covariance flow at frozen mean field (which
// selects the physical root of the quadratic covariance equations), then a joint Newton
// polish on the full real-coordinate system. Stability comes from the eigenvalues of the
// full finite-difference Jacobian.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfent/core.hpp"
#include "mfent/flow/kerr.hpp"
#include "mfent/flow/moments.hpp"
#include "mfent/flow/spin.hpp"
#include "mfent/ode.hpp"

namespace mfent::flow {

enum class Stability { Stable, Unstable };

inline std::string_view to_string(Stability s) { return s == Stability::Stable ? "stable" : "unstable"; }

using VectorField = std::function<VectorXd(const VectorXd&)>;

struct NewtonOptions {
  double tol = 1e-12;        // max-norm of the residual
  int max_iterations = 200;
  double fd_step = 1e-7;     // relative central-difference step
};

struct NewtonResult {
  VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline MatrixXd fd_jacobian(const VectorField& f, const VectorXd& x, double rel_step = 1e-7) {
  const Eigen::Index n = x.size();
  MatrixXd jac(n, n);
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    const VectorXd fp = f(xp), fm = f(xm);
    if (i == 0) jac.resize(fp.size(), n);
    jac.col(i) = (fp - fm) / (2 * h);
    xp(i) = xm(i) = x(i);
  }
  return jac;
}

/// Damped Newton with backtracking on the residual norm.
inline NewtonResult newton(const VectorField& f, VectorXd x, const NewtonOptions& opts = {}) {
  NewtonResult r;
  VectorXd fx = f(x);
  for (r.iterations = 0; r.iterations < opts.max_iterations; ++r.iterations) {
    if (!fx.allFinite()) break;
    if (fx.lpNorm<Eigen::Infinity>() < opts.tol) {
      r.converged = true;
      break;
    }
    const MatrixXd jac = fd_jacobian(f, x, opts.fd_step);
    const VectorXd dx = jac.colPivHouseholderQr().solve(-fx);
    if (!dx.allFinite()) break;
    double lambda = 1.0;
    const double f0 = fx.norm();
    bool accepted = false;
    for (int k = 0; k < 40; ++k, lambda *= 0.5) {
      const VectorXd xt = x + lambda * dx;
      const VectorXd ft = f(xt);
      if (ft.allFinite() && ft.norm() < (1.0 - 1e-4 * lambda) * f0) {
        x = xt;
        fx = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stuck at round-off level: accept if close enough.
      break;
    }
  }
  r.x = x;
  r.residual = fx.allFinite() ? fx.lpNorm<Eigen::Infinity>() : std::numeric_limits<double>::infinity();
  r.converged = r.residual < opts.tol;
  return r;
}

inline double leading_real_part(const MatrixXd& jac) {
  if (jac.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<MatrixXd> es(jac, false);
  return es.eigenvalues().real().maxCoeff();
}

struct FixedPointOptions {
  NewtonOptions newton{};
  double relax_time = 2000.0;   // longest covariance relaxation at frozen mean field
  double relax_tol = 1e-9;      // residual at which relaxation hands over to Newton
  double merge_tol = 1e-8;
  double accept_residual = 1e-10;
  double physicality_rel = 1e-6;
  ode::Options ode{};
};

/// Relaxes y' = g(y) until |g(y)| < tol or the time budget is spent; returns the final y.
inline VectorXd relax(const VectorField& g, VectorXd y, double t_max, double tol, const ode::Options& opts) {
  ode::DormandPrince<VectorXd> st([&](double, const VectorXd& yy, VectorXd& dy) { dy = g(yy); }, opts);
  double t = 0.0;
  double chunk = 1.0;
  while (t < t_max) {
    t = st.advance(t, std::min(t_max, t + chunk), y);
    if (g(y).lpNorm<Eigen::Infinity>() < tol) break;
    chunk = std::min(chunk * 1.5, 50.0);
  }
  return y;
}

struct HierarchicalRoot {
  VectorXd x, y;
  double residual = 0.0;
  double leading = 0.0;
  bool converged = false;
  std::string note;
};

/// Generic hierarchical root: mean-field field `f(x)`, covariance field `g(x, y)`.
inline HierarchicalRoot hierarchical_root(const VectorField& f, const std::function<VectorXd(const VectorXd&, const VectorXd&)>& g,
                                          const VectorXd& x_seed, const VectorXd& y_seed, const FixedPointOptions& opts) {
  HierarchicalRoot r;
  const NewtonResult mf = newton(f, x_seed, opts.newton);
  if (!mf.converged) {
    r.note = "mean-field Newton did not converge (residual " + std::to_string(mf.residual) + ")";
    return r;
  }
  const VectorXd x = mf.x;
  VectorXd y = relax([&](const VectorXd& yy) { return g(x, yy); }, y_seed, opts.relax_time, opts.relax_tol, opts.ode);
  const Eigen::Index nx = x.size(), ny = y.size();
  const VectorField joint = [&](const VectorXd& z) {
    VectorXd out(nx + ny);
    out << f(z.head(nx)), g(z.head(nx), z.tail(ny));
    return out;
  };
  VectorXd z(nx + ny);
  z << x, y;
  const NewtonResult full = newton(joint, z, opts.newton);
  r.x = full.x.head(nx);
  r.y = full.x.tail(ny);
  r.residual = full.residual;
  r.converged = full.residual < opts.accept_residual;
  if (!r.converged) r.note = "joint Newton residual " + std::to_string(full.residual);
  r.leading = leading_real_part(fd_jacobian(joint, full.x, opts.newton.fd_step));
  return r;
}

struct FixedPoint {
  GaussianMoments moments;
  Stability stability = Stability::Unstable;
  double leading_eigenvalue = 0.0;
  double residual = 0.0;
};

struct SpinFixedPoint {
  SpinFrame frame;
  Stability stability = Stability::Unstable;
  double leading_eigenvalue = 0.0;
  double residual = 0.0;
};

template <class Point>
struct FixedPointSearch {
  std::vector<Point> points;
  std::vector<std::string> failures;  // one message per seed that did not converge
};

inline VectorField kerr_mean_field_field(const KerrModel& m) {
  return [m](const VectorXd& x) { return pack_alpha(kerr_mean_field_rhs(m, unpack_alpha(x))); };
}

inline std::function<VectorXd(const VectorXd&, const VectorXd&)> kerr_covariance_field(const KerrModel& m,
                                                                                     const UnravelingScheme& s) {
  const CovarianceRhs c = kerr_covariance_system(m, s);
  return [c](const VectorXd& x, const VectorXd& y) {
    VectorXd dy;
    c(0.0, x, y, dy);
    return dy;
  };
}

/// Fixed point continued from one seed; nullopt (with `why`) when the seed fails.
inline std::optional<FixedPoint> kerr_fixed_point(const KerrModel& m, const UnravelingScheme& scheme,
                                                  const GaussianMoments& seed, const FixedPointOptions& opts,
                                                  std::string* why = nullptr) {
  try {
    const auto r = hierarchical_root(kerr_mean_field_field(m), kerr_covariance_field(m, scheme), pack_alpha(seed.alpha),
                                     pack_covariances(seed.u, seed.v), opts);
    if (!r.converged) {
      if (why) *why = r.note;
      return std::nullopt;
    }
    FixedPoint p;
    p.moments = GaussianMoments(m.modes());
    p.moments.alpha = unpack_alpha(r.x);
    unpack_covariances(r.y, m.modes(), p.moments.u, p.moments.v);
    check_physical(p.moments, 0.0, opts.physicality_rel);
    p.leading_eigenvalue = r.leading;
    p.stability = r.leading < 0.0 ? Stability::Stable : Stability::Unstable;
    p.residual = r.residual;
    return p;
  } catch (const Error& e) {
    if (why) *why = e.what();
    return std::nullopt;
  }
}

inline FixedPointSearch<FixedPoint> find_fixed_points(const KerrModel& m, const UnravelingScheme& scheme,
                                                      const std::vector<GaussianMoments>& seeds,
                                                      const FixedPointOptions& opts = {}) {
  m.validate();
  FixedPointSearch<FixedPoint> out;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const auto& s = seeds[k];
    if (s.modes() != m.modes() || !s.alpha.allFinite() || !s.u.allFinite() || !s.v.allFinite())
      throw Error("find_fixed_points: seed " + std::to_string(k) + " is not a finite state of the model");
    std::string why;
    auto p = kerr_fixed_point(m, scheme, s, opts, &why);
    if (!p) {
      out.failures.push_back("seed " + std::to_string(k) + ": " + why);
      continue;
    }
    const VectorXd z = pack(p->moments);
    const bool dup = std::any_of(out.points.begin(), out.points.end(), [&](const FixedPoint& q) {
      return (pack(q.moments) - z).lpNorm<Eigen::Infinity>() < opts.merge_tol;
    });
    if (!dup) out.points.push_back(std::move(*p));
  }
  return out;
}

// Spin frame: mean-field coordinates (theta, phi), residual (dtheta/dt, sin(theta) dphi/dt).
inline FixedPointSearch<SpinFixedPoint> find_fixed_points(const SpinModel& model, const UnravelingScheme& scheme,
                                                          const std::vector<SpinFrame>& seeds,
                                                          const FixedPointOptions& opts = {}) {
  model.validate();
  const VectorField f = [model](const VectorXd& x) {
    const cplx d = spin_angle_drift(x(0), x(1), model.omega, model.kappa);
    return VectorXd{{d.real(), d.imag()}};
  };
  const auto g = [model, scheme](const VectorXd& x, const VectorXd& y) {
    const SpinDerivative d = spin_rhs(SpinFrame{x(0), x(1), cplx(y(0), y(1)), y(2)}, scheme, model);
    return VectorXd{{d.du.real(), d.du.imag(), d.dv}};
  };
  FixedPointSearch<SpinFixedPoint> out;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const auto& s = seeds[k];
    try {
      const auto r = hierarchical_root(f, g, VectorXd{{s.theta, s.phi}}, VectorXd{{s.u.real(), s.u.imag(), s.v}}, opts);
      if (!r.converged) {
        out.failures.push_back("seed " + std::to_string(k) + ": " + r.note);
        continue;
      }
      SpinFixedPoint p;
      // The fluctuation mode is defined relative to (theta, phi), so only the 2 pi ambiguity is removed.
      p.frame = SpinFrame{r.x(0), std::remainder(r.x(1), 2 * kPi), cplx(r.y(0), r.y(1)), r.y(2)};
      check_physical(p.frame.moments(), 0.0, opts.physicality_rel);
      p.leading_eigenvalue = r.leading;
      p.stability = r.leading < 0.0 ? Stability::Stable : Stability::Unstable;
      p.residual = r.residual;
      const bool dup = std::any_of(out.points.begin(), out.points.end(), [&](const SpinFixedPoint& q) {
        return (q.frame.magnetization() - p.frame.magnetization()).norm() < opts.merge_tol &&
               std::abs(q.frame.u - p.frame.u) < opts.merge_tol && std::abs(q.frame.v - p.frame.v) < opts.merge_tol;
      });
      if (!dup) out.points.push_back(p);
    } catch (const Error& e) {
      out.failures.push_back("seed " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mfent::flow
