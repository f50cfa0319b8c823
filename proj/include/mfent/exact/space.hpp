#pragma once

// Truncated Hilbert spaces and model operators for finite-N trajectories.
// Fock spaces use a row-major product basis (last mode fastest); Dicke spaces
// the |S, M> ladder with M = -S..S stored at index M + S.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include "mfent/core.hpp"
#include "mfent/flow/kerr.hpp"
#include "mfent/flow/spin.hpp"

namespace mfent::exact {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<cplx>;

enum class BasisKind { Fock, Dicke };

struct Basis {
  BasisKind kind = BasisKind::Fock;
  std::vector<int> cutoffs;  // Fock: levels per mode (n = 0 .. cutoff-1)
  int twice_spin = 0;        // Dicke: 2S

  static Basis fock(std::vector<int> cutoffs) { return {BasisKind::Fock, std::move(cutoffs), 0}; }
  static Basis dicke(int twice_spin) { return {BasisKind::Dicke, {}, twice_spin}; }

  int modes() const { return static_cast<int>(cutoffs.size()); }
  int dim() const {
    if (kind == BasisKind::Dicke) return twice_spin + 1;
    int d = 1;
    for (int c : cutoffs) d *= c;
    return d;
  }
  // Occupation of `mode` in basis state `index`.
  int occupation(int index, int mode) const {
    for (int m = modes() - 1; m > mode; --m) index /= cutoffs[m];
    return index % cutoffs[mode];
  }
  int stride(int mode) const {
    int s = 1;
    for (int m = modes() - 1; m > mode; --m) s *= cutoffs[m];
    return s;
  }
};

inline SpMat annihilation(const Basis& b, int mode) {
  if (b.kind != BasisKind::Fock) throw Error("annihilation operator needs a Fock basis");
  std::vector<Triplet> t;
  const int s = b.stride(mode);
  for (int i = 0; i < b.dim(); ++i) {
    const int n = b.occupation(i, mode);
    if (n > 0) t.emplace_back(i - s, i, std::sqrt(static_cast<double>(n)));
  }
  SpMat a(b.dim(), b.dim());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

inline SpMat identity(int dim) {
  SpMat id(dim, dim);
  id.setIdentity();
  return id;
}

/// Largest column sum of absolute values.
inline double one_norm(const SpMat& a) {
  VectorXd col = VectorXd::Zero(a.cols());
  for (int r = 0; r < a.outerSize(); ++r)
    for (SpMat::InnerIterator it(a, r); it; ++it) col(it.col()) += std::abs(it.value());
  return col.size() ? col.maxCoeff() : 0.0;
}

/// S_+ on the Dicke ladder.
inline SpMat spin_raising(const Basis& b) {
  if (b.kind != BasisKind::Dicke) throw Error("spin operators need a Dicke basis");
  const double s = 0.5 * b.twice_spin;
  std::vector<Triplet> t;
  for (int k = 0; k < b.twice_spin; ++k) {
    const double m = k - s;
    t.emplace_back(k + 1, k, std::sqrt(s * (s + 1) - m * (m + 1)));
  }
  SpMat sp(b.dim(), b.dim());
  sp.setFromTriplets(t.begin(), t.end());
  return sp;
}

inline SpMat spin_z(const Basis& b) {
  std::vector<Triplet> t;
  for (int k = 0; k <= b.twice_spin; ++k) t.emplace_back(k, k, k - 0.5 * b.twice_spin);
  SpMat sz(b.dim(), b.dim());
  sz.setFromTriplets(t.begin(), t.end());
  return sz;
}

/// Hamiltonian and jump operators of a finite system, plus what observables need.
struct ExactModel {
  Basis basis;
  SpMat hamiltonian;
  std::vector<SpMat> jumps;
  double size = 1.0;  // N for bosons, S for the collective spin
  std::string name;
};

/// Default Fock cutoff for a mode with normalized occupation up to `max_occupation`.
inline int default_cutoff(double n, double max_occupation) {
  return std::max(20, static_cast<int>(std::ceil(4.0 * n * max_occupation)) + static_cast<int>(std::ceil(10.0 * std::sqrt(n))));
}

/// Kerr network at particle-number scale N: drives scale as sqrt(N), the Kerr term as 1/N.
inline ExactModel kerr_exact_model(const KerrModel& m, double n, const std::vector<int>& cutoffs) {
  m.validate();
  if (!(n > 0.0)) throw Error("system size N must be positive");
  if (static_cast<int>(cutoffs.size()) != m.modes()) throw Error("one cutoff per mode required");
  ExactModel e;
  e.basis = Basis::fock(cutoffs);
  e.size = n;
  e.name = m.name;
  const int d = e.basis.dim();
  std::vector<SpMat> a;
  for (int i = 0; i < m.modes(); ++i) a.push_back(annihilation(e.basis, i));
  SpMat h(d, d);
  for (int i = 0; i < m.modes(); ++i) {
    const SpMat ad = SpMat(a[i].adjoint());
    const SpMat num = ad * a[i];
    h += cplx(-m.detuning) * num;
    h += cplx(0.5 * m.kerr / n) * SpMat(ad * ad * a[i] * a[i]);
    h += cplx(m.drive[i] * std::sqrt(n)) * SpMat(ad + a[i]);
    for (int j = 0; j < m.modes(); ++j)
      if (i != j && m.hopping(i, j) != 0.0) h += cplx(-m.hopping(i, j)) * SpMat(ad * a[j]);
    e.jumps.push_back(cplx(std::sqrt(m.kappa)) * a[i]);
  }
  h.makeCompressed();
  e.hamiltonian = h;
  return e;
}

/// Collective spin S = N/2: H = Omega S_x, L = sqrt(kappa/S) S_-.
inline ExactModel spin_exact_model(const SpinModel& m, int twice_spin) {
  m.validate();
  if (twice_spin < 1) throw Error("spin size must be positive");
  ExactModel e;
  e.basis = Basis::dicke(twice_spin);
  e.size = 0.5 * twice_spin;
  e.name = "collective_spin";
  const SpMat sp = spin_raising(e.basis);
  const SpMat sm = SpMat(sp.adjoint());
  e.hamiltonian = cplx(0.5 * m.omega) * SpMat(sp + sm);
  e.jumps.push_back(cplx(std::sqrt(m.kappa / e.size)) * sm);
  return e;
}

/// Product of coherent states with amplitudes `alpha` (unnormalized scale), renormalized in the cutoff.
inline VectorXcd coherent_state(const Basis& b, const VectorXcd& alpha) {
  if (b.kind != BasisKind::Fock || alpha.size() != b.modes()) throw Error("coherent_state: basis/amplitude mismatch");
  VectorXcd psi(b.dim());
  for (int i = 0; i < b.dim(); ++i) {
    cplx c = 1.0;
    for (int m = 0; m < b.modes(); ++m) {
      const int n = b.occupation(i, m);
      // alpha^n / sqrt(n!) e^{-|alpha|^2/2}, in log space for large n.
      const double la = std::abs(alpha(m));
      if (la == 0.0) {
        c *= n == 0 ? 1.0 : 0.0;
        continue;
      }
      const double logmag = n * std::log(la) - 0.5 * std::lgamma(n + 1.0) - 0.5 * la * la;
      c *= std::polar(std::exp(logmag), n * std::arg(alpha(m)));
    }
    psi(i) = c;
  }
  return psi / psi.norm();
}

inline VectorXcd fock_state(const Basis& b, const std::vector<int>& n) {
  VectorXcd psi = VectorXcd::Zero(b.dim());
  int idx = 0;
  for (int m = 0; m < b.modes(); ++m) {
    if (n.at(m) < 0 || n[m] >= b.cutoffs[m]) throw CutoffError("Fock state outside the cutoff");
    idx = idx * b.cutoffs[m] + n[m];
  }
  psi(idx) = 1.0;
  return psi;
}

/// Dicke state |S, M>.
inline VectorXcd dicke_state(const Basis& b, int twice_m) {
  if ((twice_m + b.twice_spin) % 2 != 0 || std::abs(twice_m) > b.twice_spin) throw Error("invalid Dicke projection");
  VectorXcd psi = VectorXcd::Zero(b.dim());
  psi((twice_m + b.twice_spin) / 2) = 1.0;
  return psi;
}

/// Spin coherent state pointing along (theta, phi): exp(-i phi S_z) exp(-i theta S_y) |S, S>.
inline VectorXcd spin_coherent_state(const Basis& b, double theta, double phi) {
  const SpMat sp = spin_raising(b);
  const MatrixXcd sy = MatrixXcd(SpMat(sp - SpMat(sp.adjoint()))) / cplx(0.0, 2.0);
  const MatrixXcd rot = (cplx(0.0, -theta) * sy).exp();
  VectorXcd psi = rot * dicke_state(b, b.twice_spin);
  for (int k = 0; k <= b.twice_spin; ++k) psi(k) *= std::polar(1.0, -phi * (k - 0.5 * b.twice_spin));
  return psi;
}

/// All spins along +x.
inline VectorXcd spin_along_x(const Basis& b) { return spin_coherent_state(b, 0.5 * kPi, 0.0); }

}  // namespace mfent::exact
