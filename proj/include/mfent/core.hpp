#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mfent {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Base of everything the library throws on a violated contract.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Covariance data that is not a valid quantum state (symplectic eigenvalue below 1/2).
struct PhysicalityError : Error {
  using Error::Error;
};

// Model violates the N-scaling required for a thermodynamic limit.
struct ExtensivityError : Error {
  using Error::Error;
};

// Step-size underflow, divergence or norm loss during time stepping.
struct IntegrationError : Error {
  IntegrationError(const std::string& what, double t)
      : Error(what + " (t = " + std::to_string(t) + ")"), time(t) {}
  double time;
};

// Quantum-jump noise requested where <L> vanishes and no fallback is allowed.
struct UnravelingError : Error {
  using Error::Error;
};

// Truncated Hilbert space too small for the state being simulated.
struct CutoffError : Error {
  using Error::Error;
};

}  // namespace mfent
