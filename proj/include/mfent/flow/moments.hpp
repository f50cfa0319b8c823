#pragma once

// Real coordinates for Gaussian moments. The covariance block stores each independent
// entry once: u_ij for i <= j (complex), v_ii (real) and v_ij for i < j (complex).

#include <cmath>
#include <string>

#include "mfent/core.hpp"
#include "mfent/gstate.hpp"
#include "mfent/opalg.hpp"

namespace mfent::flow {

inline int covariance_dim(int m) { return m * (m + 1) + m * m; }

inline VectorXd pack_alpha(const VectorXcd& a) {
  VectorXd x(2 * a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    x(2 * i) = a(i).real();
    x(2 * i + 1) = a(i).imag();
  }
  return x;
}

inline VectorXcd unpack_alpha(const VectorXd& x) {
  VectorXcd a(x.size() / 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = {x(2 * i), x(2 * i + 1)};
  return a;
}

inline VectorXd pack_covariances(const MatrixXcd& u, const MatrixXcd& v) {
  const int m = static_cast<int>(u.rows());
  VectorXd y(covariance_dim(m));
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      y(k++) = u(i, j).real();
      y(k++) = u(i, j).imag();
    }
  for (int i = 0; i < m; ++i) {
    y(k++) = v(i, i).real();
    for (int j = i + 1; j < m; ++j) {
      y(k++) = v(i, j).real();
      y(k++) = v(i, j).imag();
    }
  }
  return y;
}

inline void unpack_covariances(const VectorXd& y, int m, MatrixXcd& u, MatrixXcd& v) {
  u.resize(m, m);
  v.resize(m, m);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      u(i, j) = u(j, i) = cplx(y(k), y(k + 1));
      k += 2;
    }
  for (int i = 0; i < m; ++i) {
    v(i, i) = y(k++);
    for (int j = i + 1; j < m; ++j) {
      v(i, j) = cplx(y(k), y(k + 1));
      v(j, i) = std::conj(v(i, j));
      k += 2;
    }
  }
}

inline VectorXd pack(const GaussianMoments& g) {
  VectorXd a = pack_alpha(g.alpha), c = pack_covariances(g.u, g.v);
  VectorXd z(a.size() + c.size());
  z << a, c;
  return z;
}

inline GaussianMoments unpack(const VectorXd& z, int m) {
  GaussianMoments g(m);
  g.alpha = unpack_alpha(z.head(2 * m));
  unpack_covariances(z.tail(covariance_dim(m)), m, g.u, g.v);
  return g;
}

/// Throws PhysicalityError (with the time) when the covariances stop describing a state.
inline void check_physical(const GaussianMoments& g, double t, double rel_tol) {
  if (!g.u.allFinite() || !g.v.allFinite() || !g.alpha.allFinite())
    throw IntegrationError("non-finite moments", t);
  const auto nu = detail::raw_symplectic_eigenvalues(to_quadrature(g).sigma);
  const double tol = rel_tol * (1.0 + g.v.cwiseAbs().maxCoeff());
  if (!nu.empty() && nu.front() < 0.5 - tol)
    throw PhysicalityError("covariances became unphysical at t = " + std::to_string(t) +
                           " (symplectic eigenvalue " + std::to_string(nu.front()) + ")");
}

}  // namespace mfent::flow
