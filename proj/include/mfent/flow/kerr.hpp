#pragma once

// Networks of driven, lossy Kerr cavities (single Kerr mode, Bose-Hubbard dimer)
// in the thermodynamic limit. The covariance equations below are the Wick-factorized
// N^0 part of the adjoint Lindblad action plus the Ito measurement terms; the
// symbolic generator in opalg.hpp reproduces them independently.
//
//   H = sum_i [ -Delta n_i + U/(2N) a_i^+2 a_i^2 + F_i sqrt(N) (a_i^+ + a_i) ] - sum_ij J_ij a_i^+ a_j
//   L_i = sqrt(kappa) a_i

#include <map>
#include <string>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/flow/hierarchy.hpp"
#include "mfent/flow/moments.hpp"
#include "mfent/opalg.hpp"
#include "mfent/unravel.hpp"

namespace mfent {

struct KerrModel {
  std::string name = "kerr";
  double detuning = 0.0;      // Delta
  double kerr = 0.0;          // U tilde
  std::vector<double> drive;  // F tilde per mode
  MatrixXd hopping;           // J_ij, symmetric, zero diagonal
  double kappa = 1.0;

  int modes() const { return static_cast<int>(drive.size()); }

  static KerrModel single(double detuning, double kerr, double drive, double kappa = 1.0) {
    KerrModel m;
    m.name = "single_kerr";
    m.detuning = detuning;
    m.kerr = kerr;
    m.drive = {drive};
    m.hopping = MatrixXd::Zero(1, 1);
    m.kappa = kappa;
    return m;
  }

  /// Two coupled cavities driven antisymmetrically, F_1 = -F_2 = drive.
  static KerrModel dimer(double hopping, double detuning, double kerr, double drive, double kappa = 1.0) {
    KerrModel m;
    m.name = "dimer";
    m.detuning = detuning;
    m.kerr = kerr;
    m.drive = {drive, -drive};
    m.hopping = MatrixXd::Zero(2, 2);
    m.hopping(0, 1) = m.hopping(1, 0) = hopping;
    m.kappa = kappa;
    return m;
  }

  void validate() const {
    if (!(kappa > 0.0)) throw Error("model parameter kappa must be positive");
    if (modes() < 1) throw Error("model needs at least one mode");
    if (hopping.rows() != modes() || hopping.cols() != modes()) throw Error("hopping matrix has wrong size");
  }

  /// Sets a named parameter (used by parameter sweeps).
  void set(const std::string& key, double value) {
    if (key == "Delta") detuning = value;
    else if (key == "U") kerr = value;
    else if (key == "kappa") kappa = value;
    else if (key == "J" && modes() == 2) hopping(0, 1) = hopping(1, 0) = value;
    else if (key == "F") {
      if (modes() == 2) drive = {value, -value};
      else drive.assign(drive.size(), value);
    } else if (key == "F1") drive.at(0) = value;
    else if (key == "F2") drive.at(1) = value;
    else throw Error("unknown Kerr-model parameter '" + key + "'");
  }

  OperatorPolynomial hamiltonian() const {
    using P = OperatorPolynomial;
    P h;
    for (int i = 0; i < modes(); ++i) {
      h += P::mode_monomial(i, 1, 1, -detuning, 0);
      h += P::mode_monomial(i, 2, 2, 0.5 * kerr, -2);
      h += P::mode_monomial(i, 1, 0, drive[i], 1);
      h += P::mode_monomial(i, 0, 1, drive[i], 1);
      for (int j = 0; j < modes(); ++j)
        if (i != j && hopping(i, j) != 0.0) h += -hopping(i, j) * (P::creation(i) * P::annihilation(j));
    }
    return h;
  }

  std::vector<OperatorPolynomial> jumps() const {
    std::vector<OperatorPolynomial> ls;
    for (int i = 0; i < modes(); ++i) ls.push_back(OperatorPolynomial::mode_monomial(i, 0, 1, std::sqrt(kappa), 0));
    return ls;
  }
};

/// Mean-field drift d(alpha)/dt; covariances never enter.
inline VectorXcd kerr_mean_field_rhs(const KerrModel& m, const VectorXcd& alpha) {
  const int n = m.modes();
  VectorXcd d(n);
  for (int i = 0; i < n; ++i) {
    cplx s = (I * m.detuning - 0.5 * m.kappa) * alpha(i) - I * m.kerr * std::norm(alpha(i)) * alpha(i) -
             I * m.drive[i];
    for (int j = 0; j < n; ++j) s += I * m.hopping(i, j) * alpha(j);
    d(i) = s;
  }
  return d;
}

/// Linearized fluctuation drift: d(delta)/dt = A delta + B delta^+ (with loss).
inline void kerr_drift_matrices(const KerrModel& m, const VectorXcd& alpha, MatrixXcd& a, MatrixXcd& b) {
  const int n = m.modes();
  a = I * m.hopping.cast<cplx>();
  b = MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = I * m.detuning - 2.0 * I * m.kerr * std::norm(alpha(i)) - 0.5 * m.kappa;
    b(i, i) = -I * m.kerr * alpha(i) * alpha(i);
  }
}

/// Upsilon per loss channel; <L_i> is proportional to alpha_i.
inline VectorXcd kerr_upsilons(const KerrModel& m, const UnravelingScheme& scheme, const VectorXcd& alpha) {
  VectorXcd y(m.modes());
  for (int i = 0; i < m.modes(); ++i) y(i) = upsilon(scheme, std::sqrt(m.kappa) * alpha(i));
  return y;
}

/// Covariance drift for given mean field and Upsilon values.
inline void kerr_covariance_rhs(const KerrModel& m, const VectorXcd& alpha, const VectorXcd& ups, const MatrixXcd& u,
                                const MatrixXcd& v, MatrixXcd& du, MatrixXcd& dv) {
  const int n = m.modes();
  MatrixXcd a, b;
  kerr_drift_matrices(m, alpha, a, b);
  const MatrixXcd id = MatrixXcd::Identity(n, n);
  const auto y = ups.asDiagonal();
  const MatrixXcd yc = ups.conjugate().asDiagonal();
  du = a * u + u * a.transpose() + b * v + (v.transpose() + id) * b.transpose();
  dv = a.conjugate() * v + v * a.transpose() + b.conjugate() * u + u.conjugate() * b.transpose();
  // Ito terms: channel k contributes A_ik = sqrt(kappa) u_ik and B_ik = sqrt(kappa) v_ki.
  du -= m.kappa * (u * yc * u.transpose() + v.transpose() * y * v + u * v + v.transpose() * u);
  dv -= m.kappa * (u.conjugate() * u + u.conjugate() * y * v + v * yc * u + v * v);
}

inline MomentDerivative kerr_rhs(const KerrModel& m, const UnravelingScheme& scheme, const GaussianMoments& g) {
  MomentDerivative d;
  d.dalpha = kerr_mean_field_rhs(m, g.alpha);
  kerr_covariance_rhs(m, g.alpha, kerr_upsilons(m, scheme, g.alpha), g.u, g.v, d.du, d.dv);
  return d;
}

namespace flow {

struct MomentSample {
  double t;
  GaussianMoments g;
};

inline MeanFieldRhs kerr_mean_field_system(const KerrModel& m) {
  return [m](double, const VectorXd& x, VectorXd& dx) { dx = pack_alpha(kerr_mean_field_rhs(m, unpack_alpha(x))); };
}

inline CovarianceRhs kerr_covariance_system(const KerrModel& m, const UnravelingScheme& scheme) {
  return [m, scheme](double, const VectorXd& x, const VectorXd& y, VectorXd& dy) {
    const VectorXcd a = unpack_alpha(x);
    MatrixXcd u, v, du, dv;
    unpack_covariances(y, m.modes(), u, v);
    kerr_covariance_rhs(m, a, kerr_upsilons(m, scheme, a), u, v, du, dv);
    dy = pack_covariances(du, dv);
  };
}

/// Mean field alone at the output times 0, dt_out, ..., t_max.
inline std::vector<VectorXcd> integrate_mean_field(const KerrModel& m, const VectorXcd& alpha0, double t_max,
                                                   double dt_out, const FlowOptions& opts = {}) {
  m.validate();
  std::vector<VectorXcd> out;
  for (const auto& x : integrate_mean_field(kerr_mean_field_system(m), nullptr, pack_alpha(alpha0), 0.0,
                                            output_times(t_max, dt_out), opts.ode))
    out.push_back(unpack_alpha(x));
  return out;
}

inline std::vector<MomentSample> integrate(const KerrModel& m, const UnravelingScheme& scheme,
                                           const GaussianMoments& init, double t_max, double dt_out,
                                           const FlowOptions& opts = {}) {
  m.validate();
  if (init.modes() != m.modes()) throw Error("initial state has the wrong number of modes");
  check_physical(init, 0.0, opts.physicality_rel);
  std::vector<MomentSample> out;
  integrate_hierarchy(
      kerr_mean_field_system(m), nullptr, pack_alpha(init.alpha), kerr_covariance_system(m, scheme),
      pack_covariances(init.u, init.v), 0.0, output_times(t_max, dt_out),
      [&](double t, const VectorXd& x, const VectorXd& y) {
        MomentSample s{t, GaussianMoments(m.modes())};
        s.g.alpha = unpack_alpha(x);
        unpack_covariances(y, m.modes(), s.g.u, s.g.v);
        check_physical(s.g, t, opts.physicality_rel);
        out.push_back(std::move(s));
      },
      opts.ode);
  return out;
}

}  // namespace flow

}  // namespace mfent
