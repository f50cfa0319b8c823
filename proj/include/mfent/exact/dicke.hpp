#pragma once

// Half-system entanglement of states in the maximal-spin (symmetric) sector.
// With N spins split into two halves of N/2, |S = N/2, M> decomposes into
// products of half-system Dicke states with stretched Clebsch-Gordan weights
//   C(k1, k2) = sqrt[ binom(N/2, k1) binom(N/2, k2) / binom(N, k1 + k2) ],
// k counting raised spins. The entropy follows from the singular values of
// A[k1, k2] = c_{k1+k2} C(k1, k2).

#include <cmath>

#include <Eigen/SVD>

#include "mfent/core.hpp"
#include "mfent/exact/space.hpp"

namespace mfent::exact {

inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// Clebsch-Gordan coefficient <j m1; j m2 | 2j, m1 + m2> with j = half / 2, m_i = k_i - j.
inline double stretched_clebsch_gordan(int half, int k1, int k2) {
  return std::exp(0.5 * (log_binomial(half, k1) + log_binomial(half, k2) - log_binomial(2 * half, k1 + k2)));
}

/// Von Neumann entropy (nats) of one half of a symmetric-sector state given in the Dicke basis.
inline double dicke_half_entropy(const Basis& b, const VectorXcd& psi) {
  if (b.kind != BasisKind::Dicke) throw Error("dicke_half_entropy needs a Dicke basis");
  const int n = b.twice_spin;
  if (n % 2 != 0) throw Error("half-system entropy needs an even number of spins (got N = " + std::to_string(n) + ")");
  if (psi.size() != n + 1) throw Error("state has the wrong dimension");
  const int half = n / 2;
  MatrixXcd amp(half + 1, half + 1);
  for (int k1 = 0; k1 <= half; ++k1)
    for (int k2 = 0; k2 <= half; ++k2) amp(k1, k2) = psi(k1 + k2) * stretched_clebsch_gordan(half, k1, k2);
  const VectorXd s = Eigen::JacobiSVD<MatrixXcd>(amp).singularValues();
  const double total = s.squaredNorm();
  double entropy = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    const double p = s(i) * s(i) / total;
    if (p > 1e-300) entropy -= p * std::log(p);
  }
  return entropy;
}

}  // namespace mfent::exact
