#pragma once

// Shared helpers for the test suites: random physical Gaussian states and
// brute-force Fock-space matrices that do not go through the library's algebra.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mfent/opalg.hpp"

namespace mfent::testing {

inline MatrixXcd random_unitary(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXcd z(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) z(i, j) = {nd(rng), nd(rng)};
  Eigen::HouseholderQR<MatrixXcd> qr(z);
  return qr.householderQ() * MatrixXcd::Identity(m, m);
}

/// Pure Gaussian state: independent squeezed modes mixed by a random passive unitary.
inline GaussianMoments random_pure_moments(int m, std::mt19937_64& rng, double max_r = 0.8, double max_alpha = 1.0) {
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  GaussianMoments g(m);
  VectorXcd us(m), vs(m);
  for (int k = 0; k < m; ++k) {
    const double r = max_r * ur(rng);
    const double th = 2 * kPi * ur(rng);
    us(k) = -std::polar(std::sinh(r) * std::cosh(r), th);
    vs(k) = std::sinh(r) * std::sinh(r);
    g.alpha(k) = std::polar(0.05 + max_alpha * ur(rng), 2 * kPi * ur(rng));
  }
  const MatrixXcd w = random_unitary(m, rng);
  g.u = w * us.asDiagonal() * w.transpose();
  g.v = w.conjugate() * vs.asDiagonal() * w.transpose();
  return g;
}

/// Exact matrix elements of an operator string between Fock states with n_i < cutoff.
/// Operators act on kets directly, so there is no truncation error.
class FockOracle {
 public:
  FockOracle(int modes, int cutoff) : modes_(modes), cutoff_(cutoff) {
    dim_ = 1;
    for (int i = 0; i < modes; ++i) dim_ *= cutoff;
  }
  int dim() const { return dim_; }

  std::vector<int> occupations(int index) const {
    std::vector<int> n(modes_);
    for (int i = modes_ - 1; i >= 0; --i) {
      n[i] = index % cutoff_;
      index /= cutoff_;
    }
    return n;
  }
  int index(const std::vector<int>& n) const {
    int idx = 0;
    for (int i = 0; i < modes_; ++i) {
      if (n[i] < 0 || n[i] >= cutoff_) return -1;
      idx = idx * cutoff_ + n[i];
    }
    return idx;
  }

  MatrixXcd matrix(const LadderSum& sum) const {
    MatrixXcd out = MatrixXcd::Zero(dim_, dim_);
    for (int col = 0; col < dim_; ++col) {
      for (const auto& term : sum) {
        std::vector<int> n = occupations(col);
        // Product of occupation factors is an exact integer; take a single square root.
        double amp2 = 1.0;
        for (auto it = term.ops.rbegin(); it != term.ops.rend() && amp2 != 0.0; ++it) {
          int& k = n[it->mode];
          if (it->dagger) {
            amp2 *= k + 1.0;
            ++k;
          } else {
            amp2 *= k;
            --k;
          }
        }
        if (amp2 == 0.0) continue;
        const double amp = std::sqrt(amp2);
        const int row = index(n);
        if (row >= 0) out(row, col) += term.coefficient * amp;
      }
    }
    return out;
  }

  MatrixXcd matrix(const OperatorPolynomial& p, double n_value = 1.0) const {
    return matrix(to_ladders(p, n_value));
  }

  static LadderSum to_ladders(const OperatorPolynomial& p, double n_value = 1.0) {
    LadderSum sum;
    for (const auto& [key, c] : p.terms()) {
      LadderTerm t;
      t.coefficient = c * std::pow(n_value, 0.5 * key.twice_n_power);
      for (std::size_t m = 0; m < key.word.size(); ++m)
        for (int k = 0; k < key.word[m].dag; ++k) t.ops.push_back({static_cast<int>(m), true});
      for (std::size_t m = 0; m < key.word.size(); ++m)
        for (int k = 0; k < key.word[m].plain; ++k) t.ops.push_back({static_cast<int>(m), false});
      sum.push_back(std::move(t));
    }
    return sum;
  }

 private:
  int modes_, cutoff_, dim_;
};

inline LadderSum random_ladder_sum(int modes, int max_degree, int max_terms, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nterms(1, max_terms), deg(0, max_degree), mode(0, modes - 1), coin(0, 1);
  std::normal_distribution<double> nd;
  LadderSum s;
  const int nt = nterms(rng);
  for (int t = 0; t < nt; ++t) {
    LadderTerm term;
    term.coefficient = {nd(rng), nd(rng)};
    const int d = deg(rng);
    for (int k = 0; k < d; ++k) term.ops.push_back({mode(rng), coin(rng) == 1});
    s.push_back(std::move(term));
  }
  return s;
}

}  // namespace mfent::testing
