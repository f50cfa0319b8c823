#pragma once

// Moments of truncated-basis states and their distance from Gaussianity.
//
// The reference Gaussian state with moments (alpha, u, v) is
//   rho_G = D(alpha) S(xi) rho_th(nbar) S(xi)^+ D(alpha)^+,
//   S(xi) = exp[(xi* a^2 - xi a^+2) / 2],  xi = r e^{i theta},
// with nu = sqrt((v + 1/2)^2 - |u|^2), nbar = nu - 1/2, tanh 2r = |u| / (v + 1/2)
// and theta = arg(-u). Operators are built in a padded cutoff and truncated back.

#include <algorithm>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "mfent/core.hpp"
#include "mfent/exact/space.hpp"
#include "mfent/opalg.hpp"

namespace mfent::exact {

/// Exact first and second moments of the fluctuations, one entry per Fock mode.
inline GaussianMoments measure_moments(const Basis& b, const VectorXcd& psi) {
  const int m = b.modes();
  GaussianMoments g(m);
  std::vector<VectorXcd> apsi;
  for (int i = 0; i < m; ++i) apsi.push_back(annihilation(b, i) * psi);
  for (int i = 0; i < m; ++i) g.alpha(i) = psi.dot(apsi[i]);
  for (int i = 0; i < m; ++i) {
    const SpMat ai = annihilation(b, i);
    for (int j = 0; j < m; ++j) {
      g.u(i, j) = psi.dot(ai * apsi[j]) - g.alpha(i) * g.alpha(j);
      g.v(i, j) = apsi[i].dot(apsi[j]) - std::conj(g.alpha(i)) * g.alpha(j);
    }
  }
  return g;
}

/// Displaced squeezed thermal parameters of a single mode.
struct GaussianParameters {
  cplx alpha;
  double nbar = 0.0;
  double r = 0.0;
  double theta = 0.0;
  double nu = 0.5;
};

inline GaussianParameters gaussian_parameters(cplx alpha, cplx u, double v, double tol = 1e-8) {
  const double a = v + 0.5;
  const double nu2 = a * a - std::norm(u);
  if (!(a > 0.0) || !(nu2 >= 0.25 - tol)) throw PhysicalityError("moments (u, v) do not describe a quantum state");
  GaussianParameters p;
  p.alpha = alpha;
  p.nu = std::max(0.5, std::sqrt(std::max(nu2, 0.0)));
  p.nbar = p.nu - 0.5;
  p.r = 0.5 * std::atanh(std::min(std::abs(u) / a, 1.0 - 1e-16));
  p.theta = std::abs(u) > 0.0 ? std::arg(-u) : 0.0;
  return p;
}

inline double thermal_weight(double nbar, int n) {
  if (nbar <= 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(nbar / (nbar + 1.0))) / (nbar + 1.0);
}

/// Padding added to the cutoff while applying displacement and squeezing.
inline int gaussian_padding(int cutoff) { return std::max(20, cutoff / 5); }

/// Dense reference Gaussian density matrix in a single-mode cutoff.
inline MatrixXcd gaussian_reference_state(cplx alpha, cplx u, double v, int cutoff) {
  if (cutoff < 2) throw CutoffError("cutoff too small");
  const GaussianParameters p = gaussian_parameters(alpha, u, v);
  const int d = cutoff + gaussian_padding(cutoff);
  const MatrixXcd a = MatrixXcd(annihilation(Basis::fock({d}), 0));
  const MatrixXcd ad = a.adjoint();
  const cplx xi = std::polar(p.r, p.theta);
  const MatrixXcd disp = (alpha * ad - std::conj(alpha) * a).exp();
  const MatrixXcd sq = (0.5 * (std::conj(xi) * a * a - xi * ad * ad)).exp();
  MatrixXcd th = MatrixXcd::Zero(d, d);
  for (int n = 0; n < d; ++n) th(n, n) = thermal_weight(p.nbar, n);
  const MatrixXcd u_op = disp * sq;
  const MatrixXcd rho = (u_op * th * u_op.adjoint()).topLeftCorner(cutoff, cutoff);
  const double trace = rho.trace().real();
  if (1.0 - trace > 1e-6)
    throw CutoffError("cutoff " + std::to_string(cutoff) + " holds only " + std::to_string(trace) +
                      " of the reference Gaussian state");
  return rho;
}

namespace detail {

// exp(t G) x for sparse G by scaled Taylor series.
inline VectorXcd expm_action(const SpMat& g, VectorXcd x, double norm_bound) {
  const int steps = std::max(1, static_cast<int>(std::ceil(norm_bound / 6.0)));
  const double scale = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    VectorXcd term = x;
    for (int k = 1; k < 60; ++k) {
      term = (g * term) * (scale / k);
      x += term;
      if (term.lpNorm<Eigen::Infinity>() < 1e-17 * x.lpNorm<Eigen::Infinity>()) break;
    }
  }
  return x;
}

}  // namespace detail

/// Normalized Hilbert-Schmidt distance to the Gaussian state with the same moments, for a pure
/// single-mode state: (1 + Tr rho_G^2 - 2 <psi|rho_G|psi>) / 2 with Tr rho_G^2 = 1 / (2 nu).
inline double non_gaussianity(const Basis& b, const VectorXcd& psi) {
  if (b.kind != BasisKind::Fock || b.modes() != 1) throw Error("non-Gaussianity is defined for a single Fock mode");
  const VectorXcd phi0 = psi / psi.norm();
  const GaussianMoments g = measure_moments(b, phi0);
  const GaussianParameters p = gaussian_parameters(g.alpha(0), g.u(0, 0), g.v(0, 0).real());
  // Work in the populated part of the cutoff plus padding; the tail carries < 1e-30.
  int c = b.cutoffs[0];
  double tail = 0.0;
  while (c > 1 && tail + std::norm(phi0(c - 1)) < 1e-30) tail += std::norm(phi0(--c));
  const int d = c + gaussian_padding(c);
  const SpMat a = annihilation(Basis::fock({d}), 0);
  const SpMat ad = SpMat(a.adjoint());
  VectorXcd phi = VectorXcd::Zero(d);
  phi.head(c) = phi0.head(c);
  // phi = S(-xi) D(-alpha) psi
  const SpMat gd = SpMat(cplx(-1.0) * p.alpha * ad + std::conj(p.alpha) * a);
  phi = detail::expm_action(gd, phi, one_norm(gd));
  const cplx xi = std::polar(p.r, p.theta);
  const SpMat gs = SpMat(cplx(-0.5) * (std::conj(xi) * SpMat(a * a) - xi * SpMat(ad * ad)));
  phi = detail::expm_action(gs, phi, one_norm(gs));
  double overlap = 0.0;
  for (int n = 0; n < d; ++n) overlap += thermal_weight(p.nbar, n) * std::norm(phi(n));
  const double purity_g = 1.0 / (2.0 * p.nu);
  return std::max(0.0, 0.5 * (1.0 + purity_g - 2.0 * overlap));
}

/// Same quantity for a density matrix: Tr[(rho - rho_G)^2] / (2 Tr rho^2).
inline double non_gaussianity(const MatrixXcd& rho) {
  const int c = static_cast<int>(rho.rows());
  const MatrixXcd a = MatrixXcd(annihilation(Basis::fock({c}), 0));
  const cplx alpha = (rho * a).trace();
  const cplx u = (rho * a * a).trace() - alpha * alpha;
  const double v = (rho * a.adjoint() * a).trace().real() - std::norm(alpha);
  const MatrixXcd rg = gaussian_reference_state(alpha, u, v, c);
  const MatrixXcd diff = rho - rg;
  return std::max(0.0, (diff * diff).trace().real() / (2.0 * (rho * rho).trace().real()));
}

}  // namespace mfent::exact
