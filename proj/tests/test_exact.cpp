#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "mfent/exact/ensemble.hpp"
#include "mfent/exact/moments.hpp"
#include "mfent/exact/space.hpp"
#include "mfent/exact/trajectory.hpp"

using namespace mfent;
using namespace mfent::exact;

namespace {

// H = 0, L = sqrt(kappa) a.
ExactModel damped_cavity(int cutoff, double kappa = 1.0) {
  ExactModel m;
  m.basis = Basis::fock({cutoff});
  m.hamiltonian = SpMat(cutoff, cutoff);
  m.jumps.push_back(cplx(std::sqrt(kappa)) * annihilation(m.basis, 0));
  return m;
}

Observable number(const Basis& b, double scale = 1.0) {
  const SpMat a = annihilation(b, 0);
  return {"n", [a, scale](const VectorXcd& psi) { return (a * psi).squaredNorm() / scale; }};
}

// Mean of observable 0 against `exact(t)` within three standard errors at every output time.
// A floor of 1e-8 absorbs integrator error where the ensemble spread vanishes.
void expect_within_3se(const EnsembleStats& s, const std::function<double(double)>& exact) {
  for (std::size_t i = 0; i < s.times.size(); ++i)
    EXPECT_NEAR(s.mean(0, i), exact(s.times[i]), 3.0 * s.standard_error(0, static_cast<int>(i)) + 1e-8)
        << "t = " << s.times[i];
}

const UnravelingScheme kQj{Unraveling::QuantumJump};
const UnravelingScheme kHom{Unraveling::Homodyne};
const UnravelingScheme kHet{Unraveling::Heterodyne};

}  // namespace

TEST(Basis, ProductIndexing) {
  const Basis b = Basis::fock({3, 4});
  EXPECT_EQ(b.dim(), 12);
  EXPECT_EQ(b.occupation(7, 0), 1);
  EXPECT_EQ(b.occupation(7, 1), 3);
  const SpMat a0 = annihilation(b, 0), a1 = annihilation(b, 1);
  EXPECT_LT(MatrixXcd(a0 * a1 - a1 * a0).norm(), 1e-15);
  const VectorXcd psi = fock_state(b, {2, 1});
  EXPECT_NEAR((a0 * psi).squaredNorm(), 2.0, 1e-14);
  EXPECT_NEAR((a1 * psi).squaredNorm(), 1.0, 1e-14);
  EXPECT_THROW(fock_state(b, {3, 0}), CutoffError);
}

TEST(Models, KerrHamiltonianIsHermitianAndScaled) {
  const KerrModel k = KerrModel::dimer(2.5, -1.5, 2.0, 2.0);
  const ExactModel m = kerr_exact_model(k, 4.0, {6, 6});
  EXPECT_LT(MatrixXcd(m.hamiltonian - SpMat(m.hamiltonian.adjoint())).norm(), 1e-13);
  ASSERT_EQ(m.jumps.size(), 2u);
  // <0,0|H|1,0> = F sqrt(N)
  EXPECT_NEAR(m.hamiltonian.coeff(0, 6).real(), 2.0 * 2.0, 1e-14);
  // <1,0|H|0,1> = -J
  EXPECT_NEAR(m.hamiltonian.coeff(6, 1).real(), -2.5, 1e-14);
  // <2,0|H|2,0> = -2 Delta + U/(2N) * 2
  const int i20 = 12;
  EXPECT_NEAR(m.hamiltonian.coeff(i20, i20).real(), 3.0 + 0.5, 1e-14);
  EXPECT_THROW(kerr_exact_model(k, 4.0, {6}), Error);
}

TEST(Models, DefaultCutoff) {
  EXPECT_EQ(default_cutoff(1, 0.0), 20);
  EXPECT_EQ(default_cutoff(4, 0.1), 22);
  EXPECT_EQ(default_cutoff(32, 1.72), 221 + 57);
}

TEST(MeasureMoments, CoherentState) {
  const Basis b = Basis::fock({40});
  const cplx a0(1.2, -0.7);
  const GaussianMoments g = measure_moments(b, coherent_state(b, VectorXcd::Constant(1, a0)));
  EXPECT_LT(std::abs(g.alpha(0) - a0), 1e-10);
  EXPECT_LT(std::abs(g.u(0, 0)), 1e-10);
  EXPECT_LT(std::abs(g.v(0, 0)), 1e-10);
}

TEST(MeasureMoments, FockOne) {
  const Basis b = Basis::fock({10});
  const GaussianMoments g = measure_moments(b, fock_state(b, {1}));
  EXPECT_EQ(std::abs(g.alpha(0)), 0.0);
  EXPECT_EQ(std::abs(g.u(0, 0)), 0.0);
  EXPECT_NEAR(g.v(0, 0).real(), 1.0, 1e-15);
}

TEST(MeasureMoments, SqueezedVacuum) {
  const int c = 80;
  const MatrixXcd a = MatrixXcd(annihilation(Basis::fock({c}), 0));
  const double r = 0.5;
  const MatrixXcd s = (0.5 * r * (a * a - a.adjoint() * a.adjoint())).exp();
  const VectorXcd psi = s.col(0);
  const GaussianMoments g = measure_moments(Basis::fock({c}), psi);
  EXPECT_NEAR(g.v(0, 0).real(), std::sinh(r) * std::sinh(r), 1e-8);
  EXPECT_NEAR(std::abs(g.u(0, 0)), std::sinh(r) * std::cosh(r), 1e-8);
}

TEST(GaussianReference, Vacuum) {
  const MatrixXcd rho = gaussian_reference_state(0.0, 0.0, 0.0, 15);
  MatrixXcd proj = MatrixXcd::Zero(15, 15);
  proj(0, 0) = 1.0;
  EXPECT_LT((rho - proj).norm(), 1e-12);
}

TEST(GaussianReference, ThermalWeights) {
  const MatrixXcd rho = gaussian_reference_state(0.0, 0.0, 1.0, 60);
  for (int n = 0; n < 60; ++n) EXPECT_NEAR(rho(n, n).real(), std::pow(2.0, -(n + 1)), 1e-12);
  EXPECT_LT((rho - MatrixXcd(rho.diagonal().asDiagonal())).norm(), 1e-12);
}

TEST(GaussianReference, CoherentProjector) {
  const int c = 50;
  const Basis b = Basis::fock({c});
  const VectorXcd coh = coherent_state(b, VectorXcd::Constant(1, 2.0));
  const MatrixXcd rho = gaussian_reference_state(2.0, 0.0, 0.0, c);
  EXPECT_LT((rho - coh * coh.adjoint()).norm(), 1e-8);
  const MatrixXcd a = MatrixXcd(annihilation(b, 0));
  EXPECT_LT(std::abs((rho * a).trace() - 2.0), 1e-8);
  EXPECT_LT(std::abs((rho * a * a).trace() - 4.0), 1e-8);
  EXPECT_LT(std::abs((rho * a.adjoint() * a).trace() - 4.0), 1e-8);
}

TEST(GaussianReference, MomentsRoundTrip) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  const int c = 70;
  const MatrixXcd a = MatrixXcd(annihilation(Basis::fock({c}), 0));
  for (int k = 0; k < 5; ++k) {
    const cplx alpha = std::polar(1.5 * ur(gen), 6.28 * ur(gen));
    const double v = 0.8 * ur(gen);
    const cplx u = std::polar(std::sqrt(v * (v + 1)) * ur(gen), 6.28 * ur(gen));
    const MatrixXcd rho = gaussian_reference_state(alpha, u, v, c);
    const cplx am = (rho * a).trace();
    EXPECT_LT(std::abs(am - alpha), 1e-6);
    EXPECT_LT(std::abs((rho * a * a).trace() - am * am - u), 1e-6);
    EXPECT_NEAR((rho * a.adjoint() * a).trace().real() - std::norm(am), v, 1e-6);
  }
}

TEST(GaussianReference, RejectsUnphysicalAndSmallCutoff) {
  EXPECT_THROW(gaussian_reference_state(0.0, 0.6, 0.1, 20), PhysicalityError);
  EXPECT_THROW(gaussian_reference_state(5.0, 0.0, 0.0, 10), CutoffError);
}

TEST(NonGaussianity, CoherentIsZero) {
  const Basis b = Basis::fock({60});
  const VectorXcd psi = coherent_state(b, VectorXcd::Constant(1, cplx(2.0, 1.0)));
  EXPECT_LT(non_gaussianity(b, psi), 1e-6);
  EXPECT_LT(non_gaussianity(MatrixXcd(psi * psi.adjoint())), 1e-6);
}

TEST(NonGaussianity, SqueezedCoherentIsZero) {
  const int c = 80;
  const Basis b = Basis::fock({c});
  const MatrixXcd a = MatrixXcd(annihilation(b, 0));
  const MatrixXcd s = (0.5 * (cplx(0.3, 0.2) * a * a - cplx(0.3, -0.2) * a.adjoint() * a.adjoint())).exp();
  const MatrixXcd d = (cplx(0.8, -0.4) * a.adjoint() - cplx(0.8, 0.4) * a).exp();
  const VectorXcd psi = d * s.col(0);
  EXPECT_LT(non_gaussianity(b, psi), 1e-6);
}

TEST(NonGaussianity, FockOneIsFiveTwelfths) {
  const Basis b = Basis::fock({40});
  const VectorXcd psi = fock_state(b, {1});
  EXPECT_NEAR(non_gaussianity(b, psi), 5.0 / 12.0, 1e-6);
  EXPECT_NEAR(non_gaussianity(MatrixXcd(psi * psi.adjoint())), 5.0 / 12.0, 1e-6);
}

TEST(NonGaussianity, VectorAndDensityRoutesAgree) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  const int c = 90;
  const Basis b = Basis::fock({c});
  for (int k = 0; k < 5; ++k) {
    VectorXcd psi = VectorXcd::Zero(c);
    for (int n = 0; n < 6; ++n) psi(n) = cplx(nd(gen), nd(gen));
    psi.normalize();
    const double dv = non_gaussianity(b, psi);
    EXPECT_GE(dv, 0.0);
    EXPECT_LE(dv, 1.0);
    EXPECT_NEAR(dv, non_gaussianity(MatrixXcd(psi * psi.adjoint())), 1e-8);
  }
}

TEST(Trajectories, QuantumJumpDampedCoherentState) {
  const ExactModel m = damped_cavity(30);
  const VectorXcd psi0 = coherent_state(m.basis, VectorXcd::Constant(1, 2.0));
  EnsembleConfig cfg;
  cfg.scheme = kQj;
  cfg.trajectories = 500;
  cfg.seed = 11;
  cfg.trajectory.t_max = 3.0;
  cfg.trajectory.dt_out = 0.5;
  const auto s = ensemble_run(m, psi0, {number(m.basis)}, cfg);
  expect_within_3se(s, [](double t) { return 4.0 * std::exp(-t); });
  EXPECT_GT(s.mean_jumps, 3.0);
}

TEST(Trajectories, QuantumJumpDampedFockState) {
  const ExactModel m = damped_cavity(10);
  EnsembleConfig cfg;
  cfg.scheme = kQj;
  cfg.trajectories = 4000;
  cfg.seed = 1;
  cfg.trajectory.t_max = 3.0;
  cfg.trajectory.dt_out = 0.5;
  const auto s = ensemble_run(m, fock_state(m.basis, {3}), {number(m.basis)}, cfg);
  expect_within_3se(s, [](double t) { return 3.0 * std::exp(-t); });
  EXPECT_GT(s.stddev(0, 2), 0.1);
}

TEST(Trajectories, FixedStepJumpsAgreeWithWaitingTime) {
  const ExactModel m = damped_cavity(10);
  EnsembleConfig cfg;
  cfg.scheme = kQj;
  cfg.trajectories = 1000;
  cfg.seed = 4;
  cfg.trajectory.t_max = 2.0;
  cfg.trajectory.dt_out = 0.5;
  cfg.trajectory.timing = JumpTiming::FixedStep;
  cfg.trajectory.max_step = 1e-3;
  const auto s = ensemble_run(m, fock_state(m.basis, {3}), {number(m.basis)}, cfg);
  expect_within_3se(s, [](double t) { return 3.0 * std::exp(-t); });
}

TEST(Trajectories, DiffusiveDampedCavity) {
  const ExactModel m = damped_cavity(12);
  for (const auto& scheme : {kHom, kHet}) {
    EnsembleConfig cfg;
    cfg.scheme = scheme;
    cfg.trajectories = 1000;
    cfg.seed = 21;
    cfg.trajectory.t_max = 2.0;
    cfg.trajectory.dt_out = 0.25;
    cfg.trajectory.dt = 1e-3;
    cfg.trajectory.norm_drift_tol = 1e-1;
    const auto s = ensemble_run(m, fock_state(m.basis, {2}), {number(m.basis)}, cfg);
    expect_within_3se(s, [](double t) { return 2.0 * std::exp(-t); });
    EXPECT_GT(s.stddev(0, 4), 0.05) << to_string(scheme.tag);
  }
}

TEST(Trajectories, VacuumIsInvariant) {
  const ExactModel m = damped_cavity(8);
  const VectorXcd vac = fock_state(m.basis, {0});
  TrajectoryOptions o;
  o.t_max = 1.0;
  o.dt_out = 0.5;
  o.dt = 1e-3;
  for (const auto& scheme : {kQj, kHom, kHet}) {
    const auto rec = evolve(scheme, m, vac, o, CounterRng(1), [&](int, double, const VectorXcd& psi) {
      EXPECT_LT((psi - vac).norm(), 1e-12) << to_string(scheme.tag);
    });
    EXPECT_EQ(rec.jumps.back(), 0);
  }
}

TEST(Trajectories, StatesStayNormalized) {
  const ExactModel m = kerr_exact_model(KerrModel::single(0.5, 1.0, 1.0), 4.0, {24});
  const VectorXcd psi0 = coherent_state(m.basis, VectorXcd::Constant(1, cplx(0.2, 0.2)));
  TrajectoryOptions o;
  o.t_max = 2.0;
  o.dt_out = 0.1;
  o.dt = 1e-4;
  o.norm_drift_tol = 1e-2;
  for (const auto& scheme : {kQj, kHom, kHet})
    evolve(scheme, m, psi0, o, CounterRng(2),
           [](int, double, const VectorXcd& psi) { EXPECT_NEAR(psi.norm(), 1.0, 1e-10); });
}

TEST(Trajectories, LeakageGuardAsksForLargerCutoff) {
  const ExactModel m = kerr_exact_model(KerrModel::single(0.0, 0.0, 3.0), 4.0, {12});
  TrajectoryOptions o;
  o.t_max = 2.0;
  o.dt_out = 0.5;
  try {
    evolve_qj(m, fock_state(m.basis, {0}), o, CounterRng(1));
    FAIL() << "expected CutoffError";
  } catch (const CutoffError& e) {
    EXPECT_NE(std::string(e.what()).find("raise the Fock cutoff"), std::string::npos);
  }
}

TEST(Trajectories, NormDriftFlagsLargeStep) {
  const ExactModel m = damped_cavity(10);
  TrajectoryOptions o;
  o.t_max = 1.0;
  o.dt_out = 0.5;
  o.dt = 0.05;
  EXPECT_THROW(evolve_diffusive(kHet, m, fock_state(m.basis, {3}), o, CounterRng(1)), IntegrationError);
}

TEST(Trajectories, RejectsBadInput) {
  const ExactModel m = damped_cavity(10);
  TrajectoryOptions o;
  EXPECT_THROW(evolve_qj(m, VectorXcd::Ones(10), o, CounterRng(1)), Error);
  EXPECT_THROW(evolve_qj(m, VectorXcd::Ones(3).normalized(), o, CounterRng(1)), Error);
  EXPECT_THROW(evolve_diffusive(kQj, m, fock_state(m.basis, {1}), o, CounterRng(1)), Error);
  o.t_max = -1.0;
  EXPECT_THROW(evolve_qj(m, fock_state(m.basis, {1}), o, CounterRng(1)), Error);
}

TEST(Ensemble, SingleTrajectoryHasZeroSpread) {
  const ExactModel m = damped_cavity(10);
  EnsembleConfig cfg;
  cfg.trajectory.t_max = 1.0;
  cfg.trajectory.dt_out = 0.25;
  const auto s = ensemble_run(m, fock_state(m.basis, {3}), {number(m.basis)}, cfg);
  EXPECT_EQ(s.trajectories, 1);
  EXPECT_EQ(s.stddev.norm(), 0.0);
  EXPECT_THROW(ensemble_run(m, fock_state(m.basis, {3}), {number(m.basis)}, EnsembleConfig{.trajectories = 0}), Error);
}

TEST(Ensemble, DeterministicForSeedAndThreads) {
  const ExactModel m = kerr_exact_model(KerrModel::single(0.5, 1.0, 1.0), 4.0, {24});
  const VectorXcd psi0 = coherent_state(m.basis, VectorXcd::Constant(1, cplx(0.2, 0.2)));
  for (const auto& scheme : {kQj, kHet}) {
    EnsembleConfig cfg;
    cfg.scheme = scheme;
    cfg.trajectories = 20;
    cfg.seed = 77;
    cfg.trajectory.t_max = 1.0;
    cfg.trajectory.dt_out = 0.5;
    cfg.trajectory.dt = 1e-3;
    cfg.trajectory.norm_drift_tol = 1e-1;
    const auto a = ensemble_run(m, psi0, {number(m.basis)}, cfg);
    const auto b = ensemble_run(m, psi0, {number(m.basis)}, cfg);
    cfg.threads = 4;
    const auto c = ensemble_run(m, psi0, {number(m.basis)}, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.stddev, b.stddev);
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(a.stddev, c.stddev);
    cfg.seed = 78;
    EXPECT_NE(ensemble_run(m, psi0, {number(m.basis)}, cfg).mean, a.mean);
  }
}

TEST(Ensemble, FailsWhenTooManyTrajectoriesAbort) {
  const ExactModel m = damped_cavity(10);
  EnsembleConfig cfg;
  cfg.trajectories = 10;
  cfg.trajectory.t_max = 1.0;
  cfg.trajectory.dt_out = 0.5;
  int calls = 0;
  const Observable flaky{"flaky", [&calls](const VectorXcd&) -> double {
                           if (++calls == 2) throw Error("observable failed");
                           return 0.0;
                         }};
  EXPECT_THROW(ensemble_run(m, fock_state(m.basis, {1}), {flaky}, cfg), Error);
  calls = 0;
  cfg.max_failure_fraction = 0.2;
  const auto s = ensemble_run(m, fock_state(m.basis, {1}), {flaky}, cfg);
  EXPECT_EQ(s.trajectories, 9);
  EXPECT_EQ(s.failures.size(), 1u);
}

TEST(Unravelings, DistinctBackActionSameAverage) {
  const double n = 8.0;
  const KerrModel k = KerrModel::single(0.5, 1.0, 1.0);
  const ExactModel m = kerr_exact_model(k, n, {default_cutoff(n, 1.8)});
  const VectorXcd psi0 = coherent_state(m.basis, VectorXcd::Constant(1, cplx(0.1, 0.1) * std::sqrt(n)));
  const SpMat a = annihilation(m.basis, 0);
  const std::vector<Observable> obs{
      {"re_a", [&](const VectorXcd& p) { return p.dot(a * p).real(); }},
      {"im_a", [&](const VectorXcd& p) { return p.dot(a * p).imag(); }},
      {"v", [&](const VectorXcd& p) { return measure_moments(m.basis, p).v(0, 0).real(); }}};
  EnsembleConfig cfg;
  cfg.trajectories = 300;
  cfg.seed = 5;
  cfg.trajectory.t_max = 3.0;
  cfg.trajectory.dt_out = 1.0;
  cfg.trajectory.dt = 5e-4;
  cfg.trajectory.norm_drift_tol = 1e-1;
  cfg.scheme = kHom;
  const auto hom = ensemble_run(m, psi0, obs, cfg);
  cfg.scheme = kHet;
  const auto het = ensemble_run(m, psi0, obs, cfg);
  for (int i = 1; i < 4; ++i) {
    for (int o = 0; o < 2; ++o) {
      const double se = std::hypot(hom.standard_error(o, i), het.standard_error(o, i));
      EXPECT_NEAR(hom.mean(o, i), het.mean(o, i), 3.0 * se) << obs[o].name << " t = " << hom.times[i];
    }
  }
  const double se_v = std::hypot(hom.standard_error(2, 3), het.standard_error(2, 3));
  EXPECT_GT(std::abs(hom.mean(2, 3) - het.mean(2, 3)), 3.0 * se_v);
}

TEST(Unravelings, FluctuationsShrinkWithSize) {
  const KerrModel k = KerrModel::single(0.5, 1.0, 1.0);
  for (const auto& scheme : {kQj, kHom, kHet}) {
    double last = 1e300;
    for (double n : {4.0, 8.0, 16.0}) {
      const ExactModel m = kerr_exact_model(k, n, {default_cutoff(n, 1.8)});
      const VectorXcd psi0 = coherent_state(m.basis, VectorXcd::Constant(1, cplx(0.1, 0.1) * std::sqrt(n)));
      EnsembleConfig cfg;
      cfg.scheme = scheme;
      cfg.trajectories = 200;
      cfg.seed = 8;
      cfg.trajectory.t_max = 3.0;
      cfg.trajectory.dt_out = 3.0;
      cfg.trajectory.dt = 5e-4;
      cfg.trajectory.norm_drift_tol = 1e-1;
      const auto s = ensemble_run(m, psi0, {number(m.basis, n)}, cfg);
      EXPECT_LT(s.stddev(0, 1), last) << to_string(scheme.tag) << " N = " << n;
      last = s.stddev(0, 1);
    }
  }
}
