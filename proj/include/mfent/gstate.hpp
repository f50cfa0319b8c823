#pragma once

// Gaussian-state toolkit: quadrature covariance matrices, symplectic spectra,
// passive mode transformations and von Neumann entropies of mode partitions.
// Entropies are in nats.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfent/core.hpp"
#include "mfent/opalg.hpp"

namespace mfent {

struct GaussianTolerance {
  // Symplectic eigenvalues may undershoot 1/2 by this much before the state is unphysical.
  double physicality = 1e-9;
  // Largest |nu - 1/2| for which a global state still counts as pure.
  double purity = 1e-7;
};

/// Symmetrized quadrature covariance in the (x_1, p_1, ..., x_M, p_M) basis; vacuum = identity / 2.
struct QuadratureCovariance {
  MatrixXd sigma;
  std::optional<VectorXd> first_moments;

  int modes() const { return static_cast<int>(sigma.rows() / 2); }
};

/// Subset of modes forming one side of a bipartition.
struct Partition {
  std::vector<int> subset;
};

inline QuadratureCovariance to_quadrature(const GaussianMoments& g) {
  const int m = g.modes();
  QuadratureCovariance q;
  q.sigma = MatrixXd::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double id = i == j ? 0.5 : 0.0;
      const cplx u = g.u(i, j), v = g.v(i, j);
      q.sigma(2 * i, 2 * j) = id + v.real() + u.real();
      q.sigma(2 * i + 1, 2 * j + 1) = id + v.real() - u.real();
      q.sigma(2 * i, 2 * j + 1) = u.imag() + v.imag();
      q.sigma(2 * i + 1, 2 * j) = u.imag() - v.imag();
    }
  }
  VectorXd r(2 * m);
  for (int i = 0; i < m; ++i) {
    r(2 * i) = std::sqrt(2.0) * g.alpha(i).real();
    r(2 * i + 1) = std::sqrt(2.0) * g.alpha(i).imag();
  }
  q.first_moments = std::move(r);
  return q;
}

/// Inverse of to_quadrature.
inline GaussianMoments from_quadrature(const QuadratureCovariance& q) {
  const int m = q.modes();
  GaussianMoments g(m);
  const MatrixXd& s = q.sigma;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double id = i == j ? 0.5 : 0.0;
      const double re_u = 0.5 * (s(2 * i, 2 * j) - s(2 * i + 1, 2 * j + 1));
      const double re_v = 0.5 * (s(2 * i, 2 * j) + s(2 * i + 1, 2 * j + 1)) - id;
      const double im_u = 0.5 * (s(2 * i, 2 * j + 1) + s(2 * i + 1, 2 * j));
      const double im_v = 0.5 * (s(2 * i, 2 * j + 1) - s(2 * i + 1, 2 * j));
      g.u(i, j) = {re_u, im_u};
      g.v(i, j) = {re_v, im_v};
    }
  }
  if (q.first_moments) {
    for (int i = 0; i < m; ++i)
      g.alpha(i) = cplx((*q.first_moments)(2 * i), (*q.first_moments)(2 * i + 1)) / std::sqrt(2.0);
  }
  return g;
}

inline MatrixXd symplectic_form(int modes) {
  MatrixXd om = MatrixXd::Zero(2 * modes, 2 * modes);
  for (int i = 0; i < modes; ++i) {
    om(2 * i, 2 * i + 1) = 1.0;
    om(2 * i + 1, 2 * i) = -1.0;
  }
  return om;
}

namespace detail {

// Moduli of the eigenvalues of Omega * sigma, one per +-i nu pair, ascending.
inline std::vector<double> raw_symplectic_eigenvalues(const MatrixXd& sigma) {
  const int m = static_cast<int>(sigma.rows() / 2);
  if (m == 0) return {};
  if (m == 1) {
    const double det = sigma(0, 0) * sigma(1, 1) - sigma(0, 1) * sigma(1, 0);
    return {std::sqrt(std::abs(det))};
  }
  Eigen::EigenSolver<MatrixXd> es(symplectic_form(m) * sigma, false);
  std::vector<double> mods;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) mods.push_back(std::abs(es.eigenvalues()(k)));
  std::sort(mods.begin(), mods.end());
  std::vector<double> nu;
  for (std::size_t k = 0; k < mods.size(); k += 2) nu.push_back(0.5 * (mods[k] + mods[k + 1]));
  return nu;
}

}  // namespace detail

/// Symplectic eigenvalues, ascending. Throws PhysicalityError if any lies below 1/2 - tol
/// or sigma is not positive definite.
inline std::vector<double> symplectic_spectrum(const QuadratureCovariance& q, const GaussianTolerance& tol = {}) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q.sigma, Eigen::EigenvaluesOnly);
  if (q.sigma.size() > 0 && es.eigenvalues().minCoeff() <= 0.0)
    throw PhysicalityError("covariance matrix is not positive definite");
  auto nu = detail::raw_symplectic_eigenvalues(q.sigma);
  if (!nu.empty() && nu.front() < 0.5 - tol.physicality)
    throw PhysicalityError("symplectic eigenvalue " + std::to_string(nu.front()) + " below 1/2");
  return nu;
}

/// Entropy of one symplectic mode, h(nu) = (nu+1/2) ln(nu+1/2) - (nu-1/2) ln(nu-1/2).
inline double mode_entropy(double nu) {
  if (nu <= 0.5) return 0.0;
  const double a = nu + 0.5, b = nu - 0.5;
  return a * std::log(a) - b * std::log(b);
}

/// max_k |nu_k - 1/2| over the global symplectic spectrum; 0 iff pure.
inline double purity_defect(const GaussianMoments& g) {
  double d = 0.0;
  for (double nu : detail::raw_symplectic_eigenvalues(to_quadrature(g).sigma)) d = std::max(d, std::abs(nu - 0.5));
  return d;
}

inline MatrixXd restrict_to(const MatrixXd& sigma, const std::vector<int>& modes) {
  const auto k = static_cast<Eigen::Index>(modes.size());
  MatrixXd r(2 * k, 2 * k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      r.block<2, 2>(2 * a, 2 * b) = sigma.block<2, 2>(2 * modes[a], 2 * modes[b]);
  return r;
}

inline void validate(const Partition& part, int modes) {
  std::set<int> s(part.subset.begin(), part.subset.end());
  if (s.empty()) throw Error("partition must be nonempty");
  if (s.size() != part.subset.size()) throw Error("partition lists a mode twice");
  if (*s.begin() < 0 || *s.rbegin() >= modes) throw Error("partition mode index out of range");
  if (static_cast<int>(s.size()) >= modes) throw Error("partition must be a proper subset of the modes");
}

/// Entanglement entropy of `part` against its complement. The global state must be pure.
inline double entanglement_entropy(const GaussianMoments& g, const Partition& part, const GaussianTolerance& tol = {}) {
  validate(part, g.modes());
  const QuadratureCovariance q = to_quadrature(g);
  for (double nu : symplectic_spectrum(q, tol))
    if (std::abs(nu - 0.5) > tol.purity)
      throw PhysicalityError("entanglement entropy needs a pure global state (nu = " + std::to_string(nu) + ")");
  double s = 0.0;
  for (double nu : detail::raw_symplectic_eigenvalues(restrict_to(q.sigma, part.subset))) {
    if (nu < 0.5 - tol.physicality) throw PhysicalityError("reduced state is unphysical");
    s += mode_entropy(std::max(nu, 0.5));
  }
  return s;
}

/// Passive transformation a_i -> sum_k U_ik a_k of moments.
inline GaussianMoments mode_transform(const GaussianMoments& g, const MatrixXcd& u, double tol = 1e-12) {
  const int m = g.modes();
  if (u.rows() != m || u.cols() != m) throw Error("mode_transform: size mismatch");
  if ((u * u.adjoint() - MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff() > tol)
    throw Error("mode_transform: matrix is not unitary");
  GaussianMoments r;
  r.alpha = u * g.alpha;
  r.u = u * g.u * u.transpose();
  r.v = u.conjugate() * g.v * u.transpose();
  return r;
}

/// (a_1 +- a_2)/sqrt(2): rows are the bonding and antibonding modes.
inline MatrixXcd balanced_beamsplitter() {
  MatrixXcd b(2, 2);
  b << 1.0, 1.0, 1.0, -1.0;
  return b / std::sqrt(2.0);
}

/// Half-system entanglement of a collective mode with fluctuation occupation v:
/// sqrt(1+v) arccoth(sqrt(1+v)) + ln(v/4)/2, continuous at v = 0.
/// Rearranged with d = sqrt(1+v) - 1 = v / (sqrt(1+v) + 1) so that no step cancels:
/// (1+d) log1p(d/2) + d ln 2 - (d/2) ln v.
inline double collective_entropy(double v) {
  if (v < 0.0) throw Error("collective_entropy: v must be nonnegative");
  if (v == 0.0) return 0.0;
  const double d = v / (std::sqrt(1.0 + v) + 1.0);
  return (1.0 + d) * std::log1p(0.5 * d) + d * std::log(2.0) - 0.5 * d * std::log(v);
}

}  // namespace mfent
