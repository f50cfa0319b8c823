#pragma once

// Collective spin with a transverse drive and collective decay, in the frame whose
// z axis follows the magnetization. Fluctuations around the classical spin are a single
// bosonic mode b with covariances u = <b b>, v = <b^+ b>.
//
//   H = Omega S_x,   L = sqrt(kappa / S) S_-   (c^F = (1, 0, 0), c^D = (1, -i, 0))

#include <array>
#include <cmath>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/flow/hierarchy.hpp"
#include "mfent/flow/moments.hpp"
#include "mfent/gstate.hpp"
#include "mfent/unravel.hpp"

namespace mfent {

using Vector3cd = Eigen::Vector3cd;
using Vector3d = Eigen::Vector3d;

struct SpinFrame {
  double theta = 0.0;
  double phi = 0.0;
  cplx u{};
  double v = 0.0;

  Vector3d magnetization() const {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
  }
  GaussianMoments moments() const {
    GaussianMoments g(1);
    g.u(0, 0) = u;
    g.v(0, 0) = v;
    return g;
  }
  static SpinFrame from_magnetization(const Vector3d& m, cplx u = {}, double v = 0.0) {
    const Vector3d n = m.normalized();
    return {std::acos(std::clamp(n.z(), -1.0, 1.0)), std::atan2(n.y(), n.x()), u, v};
  }
};

struct SpinModel {
  double omega = 0.0;
  double kappa = 1.0;

  void validate() const {
    if (!(kappa > 0.0)) throw Error("model parameter kappa must be positive");
  }
};

/// Rotation taking lab components to the frame (rows: x~, y~, z~ axes).
inline Eigen::Matrix3d spin_rotation(double theta, double phi) {
  const double ct = std::cos(theta), st = std::sin(theta), cp = std::cos(phi), sp = std::sin(phi);
  Eigen::Matrix3d g;
  g << ct * cp, ct * sp, -st, -sp, cp, 0.0, st * cp, st * sp, ct;
  return g;
}

struct SpinCoefficients {
  Vector3cd c;  // components in the rotated frame
  cplx e{};
  cplx f{};
};

inline SpinCoefficients spin_coefficients(double theta, double phi, const Vector3cd& c) {
  SpinCoefficients r;
  r.c = spin_rotation(theta, phi).cast<cplx>() * c;
  r.e = r.c(0) + I * r.c(1);
  r.f = std::conj(r.c(0)) + I * std::conj(r.c(1));
  return r;
}

inline const Vector3cd kDriveCoupling{1.0, 0.0, 0.0};
inline const Vector3cd kDecayCoupling{1.0, -I, 0.0};

struct SpinDerivative {
  double dtheta = 0.0;
  double dphi = 0.0;
  double sin_dphi = 0.0;  // sin(theta) dphi/dt, regular at the poles
  cplx du{};
  double dv = 0.0;
  bool pole_regularized = false;
};

// Below this |sin(theta)| the azimuth rate is not formed; the inertial term is dropped.
inline constexpr double kPoleEpsilon = 1e-9;

/// Complex angle drift X with d(theta)/dt = Re X and sin(theta) d(phi)/dt = Im X.
inline cplx spin_angle_drift(double theta, double phi, double omega, double kappa) {
  const auto fr = spin_coefficients(theta, phi, kDriveCoupling);
  const auto de = spin_coefficients(theta, phi, kDecayCoupling);
  return -I * omega * fr.e - 0.5 * kappa * (de.f * de.c(2) - de.e * std::conj(de.c(2)));
}

inline SpinDerivative spin_rhs(const SpinFrame& s, const UnravelingScheme& scheme, double omega, double kappa) {
  const auto fr = spin_coefficients(s.theta, s.phi, kDriveCoupling);
  const auto de = spin_coefficients(s.theta, s.phi, kDecayCoupling);
  const cplx x = -I * omega * fr.e - 0.5 * kappa * (de.f * de.c(2) - de.e * std::conj(de.c(2)));
  SpinDerivative d;
  d.dtheta = x.real();
  d.sin_dphi = x.imag();
  const double st = std::sin(s.theta);
  if (std::abs(st) < kPoleEpsilon) {
    d.pole_regularized = true;
  } else {
    d.dphi = x.imag() / st;
  }
  // <L> in the frame is proportional to C^D_z.
  const cplx y = upsilon(scheme, de.c(2));
  const cplx e = de.e, f = de.f, u = s.u;
  const double v = s.v;
  const double f2 = std::norm(f), e2 = std::norm(e);
  const cplx p = e * (v + 1.0) + std::conj(f) * u;
  const cplx q = std::conj(e) * u + f * v;
  d.du = 2.0 * I * (omega * fr.c(2) - std::cos(s.theta) * d.dphi) * u - 0.5 * kappa * (e * f + (f2 - e2) * u) -
         kappa * p * q - 0.5 * kappa * std::conj(y) * p * p - 0.5 * kappa * y * q * q;
  d.dv = -0.5 * kappa * ((f2 - e2) * v - e2) - kappa * std::real(y * (std::conj(e) * (v + 1.0) + f * std::conj(u)) * q) -
         0.5 * kappa * std::norm(p) - 0.5 * kappa * std::norm(q);
  return d;
}

inline SpinDerivative spin_rhs(const SpinFrame& s, const UnravelingScheme& scheme, const SpinModel& m) {
  return spin_rhs(s, scheme, m.omega, m.kappa);
}

struct SpinSteadyState {
  Vector3d m;
  double u = 0.0;
  double v = 0.0;
  double entropy = 0.0;

  SpinFrame frame() const { return SpinFrame::from_magnetization(m, u, v); }
};

/// Stationary magnetization and fluctuations, shared by all unravelings. Needs 0 <= Omega < kappa.
inline SpinSteadyState spin_steady_state(double omega, double kappa) {
  if (!(kappa > 0.0)) throw Error("spin_steady_state: kappa must be positive");
  if (omega < 0.0) throw Error("spin_steady_state: Omega must be nonnegative");
  if (omega >= kappa) throw Error("spin_steady_state: no stationary solution for Omega >= kappa (oscillating phase)");
  const double s = std::sqrt(kappa * kappa - omega * omega);
  SpinSteadyState r;
  r.m = Vector3d(0.0, omega / kappa, -s / kappa);
  r.u = omega * omega / (4.0 * kappa * s);
  r.v = -(-kappa + omega * omega / (2.0 * kappa) + s) / (2.0 * s);
  r.v = std::max(r.v, 0.0);
  r.entropy = collective_entropy(r.v);
  return r;
}

namespace flow {

struct SpinSample {
  double t;
  SpinFrame frame;
  Vector3d m;
};

inline MeanFieldRhs spin_mean_field_system(const SpinModel& model) {
  return [model](double, const VectorXd& x, VectorXd& dx) {
    const SpinFrame s = SpinFrame::from_magnetization(Vector3d(x(0), x(1), x(2)));
    const cplx xd = spin_angle_drift(s.theta, s.phi, model.omega, model.kappa);
    const Eigen::Matrix3d g = spin_rotation(s.theta, s.phi);
    dx = xd.real() * g.row(0).transpose() + xd.imag() * g.row(1).transpose();
  };
}

inline bool renormalize_magnetization(VectorXd& x) {
  x /= x.norm();
  return true;
}

inline CovarianceRhs spin_covariance_system(const SpinModel& model, const UnravelingScheme& scheme) {
  return [model, scheme](double, const VectorXd& x, const VectorXd& y, VectorXd& dy) {
    const SpinFrame s = SpinFrame::from_magnetization(Vector3d(x(0), x(1), x(2)), cplx(y(0), y(1)), y(2));
    const SpinDerivative d = spin_rhs(s, scheme, model);
    dy.resize(3);
    dy << d.du.real(), d.du.imag(), d.dv;
  };
}

/// Magnetization is integrated as a unit vector (regular at the poles) and mapped back to angles.
inline std::vector<SpinSample> integrate(const SpinModel& model, const UnravelingScheme& scheme, const SpinFrame& init,
                                         double t_max, double dt_out, const FlowOptions& opts = {}) {
  model.validate();
  check_physical(init.moments(), 0.0, opts.physicality_rel);
  std::vector<SpinSample> out;
  VectorXd y(3);
  y << init.u.real(), init.u.imag(), init.v;
  const VectorXd x0 = init.magnetization();
  integrate_hierarchy(
      spin_mean_field_system(model), renormalize_magnetization, x0, spin_covariance_system(model, scheme), y, 0.0,
      output_times(t_max, dt_out),
      [&](double t, const VectorXd& x, const VectorXd& yy) {
        const Vector3d m = Vector3d(x(0), x(1), x(2)).normalized();
        SpinSample s{t, SpinFrame::from_magnetization(m, cplx(yy(0), yy(1)), yy(2)), m};
        check_physical(s.frame.moments(), t, opts.physicality_rel);
        out.push_back(s);
      },
      opts.ode);
  return out;
}

}  // namespace flow

}  // namespace mfent
