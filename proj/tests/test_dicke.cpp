#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <Eigen/SVD>

#include "mfent/exact/dicke.hpp"
#include "mfent/exact/ensemble.hpp"
#include "mfent/exact/space.hpp"

using namespace mfent;
using namespace mfent::exact;

namespace {

double binomial(int n, int k) { return std::exp(log_binomial(n, k)); }

// Expands a symmetric-sector state into the 2^N product basis (bit i = spin i raised)
// and returns the entropy of the first N/2 spins.
double brute_force_half_entropy(const VectorXcd& c, int n) {
  const int dim = 1 << n;
  VectorXcd full = VectorXcd::Zero(dim);
  for (int x = 0; x < dim; ++x) {
    const int k = __builtin_popcount(static_cast<unsigned>(x));
    full(x) = c(k) / std::sqrt(binomial(n, k));
  }
  const int h = n / 2;
  MatrixXcd amp(1 << h, 1 << h);
  for (int x = 0; x < dim; ++x) amp(x & ((1 << h) - 1), x >> h) = full(x);
  const VectorXd s = Eigen::JacobiSVD<MatrixXcd>(amp).singularValues();
  double e = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    const double p = s(i) * s(i);
    if (p > 1e-300) e -= p * std::log(p);
  }
  return e;
}

VectorXcd random_state(int dim, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  VectorXcd psi(dim);
  for (int i = 0; i < dim; ++i) psi(i) = cplx(nd(gen), nd(gen));
  return psi.normalized();
}

}  // namespace

TEST(DickeOperators, LadderAlgebra) {
  for (int twice_s : {1, 2, 7, 16}) {
    const Basis b = Basis::dicke(twice_s);
    const MatrixXcd sp = MatrixXcd(spin_raising(b));
    const MatrixXcd sm = sp.adjoint();
    const MatrixXcd sz = MatrixXcd(spin_z(b));
    EXPECT_LT((sp * sm - sm * sp - 2.0 * sz).norm(), 1e-12);
    const double s = 0.5 * twice_s;
    const MatrixXcd casimir = 0.5 * (sp * sm + sm * sp) + sz * sz;
    EXPECT_LT((casimir - s * (s + 1) * MatrixXcd::Identity(b.dim(), b.dim())).norm(), 1e-12);
  }
}

TEST(DickeOperators, SpinModel) {
  const ExactModel m = spin_exact_model(SpinModel{0.9, 1.0}, 8);
  EXPECT_DOUBLE_EQ(m.size, 4.0);
  EXPECT_LT(MatrixXcd(m.hamiltonian - SpMat(m.hamiltonian.adjoint())).norm(), 1e-14);
  ASSERT_EQ(m.jumps.size(), 1u);
  // L = sqrt(kappa / S) S_-: <S, S-1| L |S, S> = sqrt(kappa / S) sqrt(2S)
  EXPECT_NEAR(m.jumps[0].coeff(7, 8).real(), std::sqrt(2.0), 1e-14);
  EXPECT_THROW(spin_exact_model(SpinModel{0.9, 1.0}, 0), Error);
}

TEST(DickeStates, AlongXMatchesBinomialAmplitudes) {
  for (int twice_s : {2, 8, 32}) {
    const Basis b = Basis::dicke(twice_s);
    const VectorXcd psi = spin_along_x(b);
    for (int k = 0; k <= twice_s; ++k)
      EXPECT_NEAR(std::abs(psi(k)), std::sqrt(binomial(twice_s, k) / std::pow(2.0, twice_s)), 1e-10);
    const MatrixXcd sp = MatrixXcd(spin_raising(b));
    const double sx = psi.dot(0.5 * (sp + sp.adjoint()) * psi).real();
    EXPECT_NEAR(sx, 0.5 * twice_s, 1e-10);
  }
}

TEST(ClebschGordan, StretchedCoefficients) {
  EXPECT_NEAR(stretched_clebsch_gordan(1, 0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(stretched_clebsch_gordan(1, 1, 1), 1.0, 1e-15);
  // Rows are normalized: sum over k1 + k2 = K of C^2 = 1.
  for (int half : {3, 16, 128}) {
    for (int big_k : {0, half / 2, half, 2 * half}) {
      double sum = 0.0;
      for (int k1 = std::max(0, big_k - half); k1 <= std::min(half, big_k); ++k1)
        sum += std::pow(stretched_clebsch_gordan(half, k1, big_k - k1), 2);
      EXPECT_NEAR(sum, 1.0, 1e-10) << half << " " << big_k;
    }
  }
}

TEST(DickeEntropy, TwoSpins) {
  const Basis b = Basis::dicke(2);
  EXPECT_NEAR(dicke_half_entropy(b, dicke_state(b, 0)), std::log(2.0), 1e-14);
  EXPECT_NEAR(dicke_half_entropy(b, dicke_state(b, 2)), 0.0, 1e-14);
}

TEST(DickeEntropy, ProductStateHasNone) {
  const Basis b = Basis::dicke(24);
  EXPECT_NEAR(dicke_half_entropy(b, spin_along_x(b)), 0.0, 1e-10);
}

TEST(DickeEntropy, MatchesBruteForce) {
  std::mt19937_64 gen(17);
  for (int n : {2, 4, 6}) {
    for (int rep = 0; rep < 5; ++rep) {
      const VectorXcd c = random_state(n + 1, gen);
      EXPECT_NEAR(dicke_half_entropy(Basis::dicke(n), c), brute_force_half_entropy(c, n), 1e-10) << "N = " << n;
    }
  }
}

TEST(DickeEntropy, LargeSystemsStayFinite) {
  std::mt19937_64 gen(3);
  const Basis b = Basis::dicke(256);
  const double e = dicke_half_entropy(b, random_state(257, gen));
  EXPECT_TRUE(std::isfinite(e));
  EXPECT_GT(e, 0.0);
  EXPECT_LE(e, std::log(129.0));
}

TEST(DickeEntropy, RejectsOddN) {
  const Basis b = Basis::dicke(3);
  EXPECT_THROW(dicke_half_entropy(b, dicke_state(b, 1)), Error);
  EXPECT_THROW(dicke_half_entropy(Basis::fock({4}), VectorXcd::Ones(4)), Error);
}

TEST(DickeTrajectories, UndrivenGroundStateIsDark) {
  const ExactModel m = spin_exact_model(SpinModel{0.0, 1.0}, 10);
  const VectorXcd down = dicke_state(m.basis, -10);
  TrajectoryOptions o;
  o.t_max = 20.0;
  o.dt_out = 5.0;
  const auto rec = evolve_qj(m, down, o, CounterRng(4), [&](int, double, const VectorXcd& psi) {
    EXPECT_LT((psi - down).norm(), 1e-12);
  });
  EXPECT_EQ(rec.jumps.back(), 0);
}

TEST(DickeTrajectories, UndrivenDecayCascades) {
  // From the top state every trajectory must jump exactly 2S times to reach the dark state.
  const ExactModel m = spin_exact_model(SpinModel{0.0, 1.0}, 6);
  TrajectoryOptions o;
  o.t_max = 60.0;
  o.dt_out = 60.0;
  for (std::uint64_t k = 0; k < 5; ++k)
    EXPECT_EQ(evolve_qj(m, dicke_state(m.basis, 6), o, CounterRng(9, k)).jumps.back(), 6);
}
