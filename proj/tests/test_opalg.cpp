#include <random>

#include <gtest/gtest.h>

#include "mfent/flow/kerr.hpp"
#include "mfent/opalg.hpp"
#include "support.hpp"

using namespace mfent;
using mfent::testing::FockOracle;
using P = OperatorPolynomial;

namespace {

LadderTerm ops(std::initializer_list<Ladder> l, cplx c = 1.0) { return LadderTerm{c, 0, std::vector<Ladder>(l)}; }
constexpr Ladder a0{0, false}, ad0{0, true};

double max_abs(const MatrixXcd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(NormalOrder, CommutatorOfSingleMode) {
  const P r = normal_order(LadderSum{ops({a0, ad0})});
  EXPECT_EQ(r, P::mode_monomial(0, 1, 1) + P::identity());
}

TEST(NormalOrder, NumberOperatorSquared) {
  const P r = normal_order(LadderSum{ops({ad0, a0, ad0, a0})});
  EXPECT_EQ(r, P::mode_monomial(0, 2, 2) + P::mode_monomial(0, 1, 1));
}

TEST(NormalOrder, Idempotent) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const P p = normal_order(mfent::testing::random_ladder_sum(2, 4, 4, rng));
    EXPECT_EQ(normal_order(p), p);
    EXPECT_EQ(normal_order(FockOracle::to_ladders(p)), p);
  }
}

TEST(NormalOrder, NoZeroCoefficientsAndUniqueKeys) {
  const P p = P::creation(0) * P::annihilation(0) - P::mode_monomial(0, 1, 1);
  EXPECT_TRUE(p.is_zero());
  std::mt19937_64 rng(3);
  const P q = normal_order(mfent::testing::random_ladder_sum(2, 4, 6, rng));
  for (const auto& [k, c] : q.terms()) EXPECT_NE(c, cplx{});
}

TEST(NormalOrder, MatchesFockMatrixOfInput) {
  std::mt19937_64 rng(2024);
  const FockOracle fock(2, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const LadderSum raw = mfent::testing::random_ladder_sum(2, 4, 3, rng);
    const MatrixXcd expected = fock.matrix(raw);
    const MatrixXcd got = fock.matrix(normal_order(raw));
    ASSERT_LT(max_abs(expected - got), 1e-12) << "trial " << trial;
  }
}

TEST(PolynomialAlgebra, AdditionAndScalingLaws) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 25; ++k) {
    const P a = normal_order(mfent::testing::random_ladder_sum(2, 3, 3, rng));
    const P b = normal_order(mfent::testing::random_ladder_sum(2, 3, 3, rng));
    const P c = normal_order(mfent::testing::random_ladder_sum(2, 3, 3, rng));
    EXPECT_EQ(a + b, b + a);
    const P lhs = (a + b) + c, rhs = a + (b + c);
    ASSERT_EQ(lhs.size(), rhs.size());
    for (const auto& [key, coeff] : lhs.terms()) EXPECT_NEAR(std::abs(coeff - rhs.coefficient(key)), 0.0, 1e-14);
    const P s1 = cplx(2.0, -1.0) * (a + b), s2 = cplx(2.0, -1.0) * a + cplx(2.0, -1.0) * b;
    for (const auto& [key, coeff] : s1.terms()) EXPECT_NEAR(std::abs(coeff - s2.coefficient(key)), 0.0, 1e-13);
  }
}

TEST(PolynomialAlgebra, ProductTracksPowersOfN) {
  const P x = P::mode_monomial(0, 1, 0, 1.0, 1);
  const P y = P::mode_monomial(0, 0, 1, 1.0, -2);
  const P xy = y * x;  // a a^+ N^(-1/2)
  EXPECT_EQ(xy, P::mode_monomial(0, 1, 1, 1.0, -1) + P::scalar(1.0, -1));
}

TEST(AdjointLiouvillian, DampedDetunedCavityOnAnnihilator) {
  const double delta = 0.7, kappa = 1.3;
  const P h = P::mode_monomial(0, 1, 1, -delta);
  const std::vector<P> ls{P::mode_monomial(0, 0, 1, std::sqrt(kappa))};
  const P r = adjoint_liouvillian(h, ls, P::annihilation(0));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(std::abs(r.coefficient({0, {{0, 1}}}) - (I * delta - kappa / 2)), 0.0, 1e-15);
}

TEST(AdjointLiouvillian, NumberOperatorDecays) {
  const double kappa = 0.4;
  const std::vector<P> ls{P::mode_monomial(0, 0, 1, std::sqrt(kappa))};
  const P r = adjoint_liouvillian(P{}, ls, P::mode_monomial(0, 1, 1));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(std::abs(r.coefficient({0, {{1, 1}}}) + kappa), 0.0, 1e-15);
}

TEST(AdjointLiouvillian, IdentityIsAnnihilated) {
  std::mt19937_64 rng(5);
  const P h = normal_order(mfent::testing::random_ladder_sum(2, 4, 4, rng));
  EXPECT_TRUE(adjoint_liouvillian(h, {}, P::identity()).is_zero());
  const std::vector<P> ls{normal_order(mfent::testing::random_ladder_sum(2, 2, 2, rng))};
  const P r = adjoint_liouvillian(h, ls, P::identity());
  for (const auto& [k, c] : r.terms()) EXPECT_LT(std::abs(c), 1e-13);
}

// Tr[(L^+ O) rho] = Tr[O (L rho)] with the Lindbladian built from truncated matrices. rho lives on
// n_i <= 3 and all operators have degree <= 2, so every intermediate stays inside cutoff 12.
TEST(AdjointLiouvillian, DualToSchrodingerPictureLindbladian) {
  std::mt19937_64 rng(99);
  const FockOracle fock(2, 12);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    LadderSum hraw = mfent::testing::random_ladder_sum(2, 2, 3, rng);
    LadderSum hdag = hraw;
    for (auto& t : hdag) {
      t.coefficient = std::conj(t.coefficient);
      std::reverse(t.ops.begin(), t.ops.end());
      for (auto& o : t.ops) o.dagger = !o.dagger;
    }
    hraw.insert(hraw.end(), hdag.begin(), hdag.end());
    const P h = normal_order(hraw);
    const std::vector<P> ls{normal_order(mfent::testing::random_ladder_sum(2, 2, 2, rng)),
                            normal_order(mfent::testing::random_ladder_sum(2, 1, 2, rng))};
    const P o = normal_order(mfent::testing::random_ladder_sum(2, 2, 3, rng));

    MatrixXcd psi = MatrixXcd::Zero(fock.dim(), 3);
    for (int col = 0; col < 3; ++col)
      for (int n1 = 0; n1 <= 3; ++n1)
        for (int n2 = 0; n2 <= 3; ++n2) psi(fock.index({n1, n2}), col) = {nd(rng), nd(rng)};
    MatrixXcd rho = psi * psi.adjoint();
    rho /= rho.trace();

    const MatrixXcd hm = fock.matrix(h), om = fock.matrix(o);
    MatrixXcd lrho = -I * (hm * rho - rho * hm);
    for (const auto& l : ls) {
      const MatrixXcd lm = fock.matrix(l);
      const MatrixXcd ldl = lm.adjoint() * lm;
      lrho += lm * rho * lm.adjoint() - 0.5 * (ldl * rho + rho * ldl);
    }
    const cplx rhs = (om * lrho).trace();
    const cplx lhs = (fock.matrix(adjoint_liouvillian(h, ls, o)) * rho).trace();
    EXPECT_LT(std::abs(lhs - rhs), 1e-10) << "trial " << trial;
  }
}

TEST(GaussianExpectation, FirstMomentAndNumber) {
  GaussianMoments g(1);
  g.alpha(0) = {0.3, -0.2};
  g.v(0, 0) = 0.4;
  g.u(0, 0) = {0.1, 0.5};
  const NSeries a = gaussian_expectation(P::annihilation(0), g);
  EXPECT_EQ(a.coefficients().size(), 1u);
  EXPECT_EQ(a[1], g.alpha(0));
  const NSeries n = gaussian_expectation(P::mode_monomial(0, 1, 1), g);
  EXPECT_NEAR(std::abs(n[2] - std::norm(g.alpha(0))), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(n[0] - 0.4), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(n[1]), 0.0, 1e-15);
}

TEST(GaussianExpectation, QuadraticPolynomialsMatchMomentFormulas) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const GaussianMoments g = mfent::testing::random_pure_moments(2, rng);
    const double n = 3.0 + 10.0 * std::abs(nd(rng));
    const double sn = std::sqrt(n);
    cplx expected{};
    P p;
    auto coeff = [&] { return cplx(nd(rng), nd(rng)); };
    const cplx c0 = coeff();
    p += P::scalar(c0);
    expected += c0;
    for (int i = 0; i < 2; ++i) {
      const cplx c1 = coeff(), c2 = coeff();
      p += P::mode_monomial(i, 0, 1, c1) + P::mode_monomial(i, 1, 0, c2);
      expected += c1 * sn * g.alpha(i) + c2 * sn * std::conj(g.alpha(i));
      for (int j = 0; j < 2; ++j) {
        const cplx caa = coeff(), cda = coeff(), cdd = coeff();
        p += caa * (P::annihilation(i) * P::annihilation(j));
        p += cda * (P::creation(i) * P::annihilation(j));
        p += cdd * (P::creation(i) * P::creation(j));
        expected += caa * (n * g.alpha(i) * g.alpha(j) + g.u(i, j));
        expected += cda * (n * std::conj(g.alpha(i)) * g.alpha(j) + g.v(i, j));
        expected += cdd * std::conj(n * g.alpha(i) * g.alpha(j) + g.u(i, j));
      }
    }
    const cplx got = gaussian_expectation(p, g, n);
    EXPECT_LT(std::abs(got - expected), 1e-14 * std::max(1.0, std::abs(expected)) * 10) << trial;
  }
}

TEST(GaussianExpectation, RejectsStringsNotInNormalOrder) {
  GaussianMoments g(1);
  EXPECT_THROW(gaussian_expectation(LadderSum{ops({a0, ad0})}, g), Error);
  EXPECT_NO_THROW(gaussian_expectation(LadderSum{ops({ad0, a0})}, g));
}

TEST(ThermodynamicRhs, RejectsNonExtensiveModels) {
  const P bad = P::mode_monomial(0, 1, 1, 1.0, 2);  // N a^+ a grows like N^2
  try {
    thermodynamic_rhs(bad, {P::mode_monomial(0, 0, 1)}, 1, {});
    FAIL() << "expected ExtensivityError";
  } catch (const ExtensivityError& e) {
    EXPECT_NE(std::string(e.what()).find("a+0 a0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(thermodynamic_rhs(P{}, {P::mode_monomial(0, 0, 1, 1.0, 1)}, 1, {}), ExtensivityError);
}

TEST(ThermodynamicRhs, SingleKerrMeanFieldAndCovariances) {
  const double delta = 0.5, u_kerr = 1.0, f = 1.0, kappa = 1.0;
  const KerrModel model = KerrModel::single(delta, u_kerr, f, kappa);
  std::mt19937_64 rng(4);
  for (auto tag : kAllUnravelings) {
    const GeneratedRhs rhs = thermodynamic_rhs(model.hamiltonian(), model.jumps(), 1, {tag});
    for (int k = 0; k < 5; ++k) {
      const GaussianMoments g = mfent::testing::random_pure_moments(1, rng);
      const cplx a = g.alpha(0), u = g.u(0, 0);
      const double v = g.v(0, 0).real();
      const cplx y = upsilon({tag}, a);
      const MomentDerivative d = rhs(g);
      const cplx da = (I * delta - kappa / 2) * a - I * u_kerr * std::norm(a) * a - I * f;
      const cplx du = (2.0 * I * delta - kappa) * u - I * u_kerr * (a * a + 2.0 * a * a * v + 4.0 * std::norm(a) * u) -
                      kappa * (2.0 * u * v + std::conj(y) * u * u + y * v * v);
      const double dv = 2 * u_kerr * std::imag(a * a * std::conj(u)) - kappa * v -
                        kappa * (2 * std::real(y * std::conj(u) * v) + std::norm(u) + v * v);
      EXPECT_LT(std::abs(d.dalpha(0) - da), 1e-12);
      EXPECT_LT(std::abs(d.du(0, 0) - du), 1e-12);
      EXPECT_LT(std::abs(d.dv(0, 0) - dv), 1e-12);
    }
  }
}

TEST(ThermodynamicRhs, DriveFreeVacuumIsStationaryUnderHeterodyne) {
  const KerrModel model = KerrModel::single(0.3, 0.0, 0.0);
  const GeneratedRhs rhs = thermodynamic_rhs(model.hamiltonian(), model.jumps(), 1, {Unraveling::Heterodyne});
  const MomentDerivative d = rhs(GaussianMoments::vacuum(1));
  EXPECT_EQ(std::abs(d.du(0, 0)), 0.0);
  EXPECT_EQ(std::abs(d.dv(0, 0)), 0.0);
}

TEST(ThermodynamicRhs, GeneratedEqualsHandCodedForKerrAndDimer) {
  std::mt19937_64 rng(31);
  const KerrModel models[] = {KerrModel::single(0.5, 1.0, 1.0), KerrModel::dimer(2.5, -1.5, 2.0, 2.7, 1.3)};
  for (const auto& model : models) {
    for (auto tag : kAllUnravelings) {
      const UnravelingScheme scheme{tag};
      const GeneratedRhs gen = thermodynamic_rhs(model.hamiltonian(), model.jumps(), model.modes(), scheme);
      for (int k = 0; k < 100; ++k) {
        const GaussianMoments g = mfent::testing::random_pure_moments(model.modes(), rng);
        const MomentDerivative a = gen(g), b = kerr_rhs(model, scheme, g);
        ASSERT_LT(max_abs(a.dalpha - b.dalpha), 1e-12);
        ASSERT_LT(max_abs(a.du - b.du), 1e-12);
        ASSERT_LT(max_abs(a.dv - b.dv), 1e-12);
      }
    }
  }
}
