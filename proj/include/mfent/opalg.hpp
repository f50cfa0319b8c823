#pragma once

// Normal-ordered bosonic operator polynomials with explicit powers of N, the
// adjoint Lindblad action on them, Gaussian (Wick) expectation values, and the
// generated thermodynamic-limit equations of motion for first moments and
// covariances of a monitored system.

#include <algorithm>
#include <cmath>
#include <compare>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/unravel.hpp"

namespace mfent {

/// Normal-ordered power of a single mode: (a^dagger)^dag * a^plain.
struct ModePower {
  int dag = 0;
  int plain = 0;
  auto operator<=>(const ModePower&) const = default;
  int degree() const { return dag + plain; }
};

/// Product over modes of normal-ordered mode powers. Index = mode; no trailing identities.
using Word = std::vector<ModePower>;

/// Key of a term: exponent of N (stored doubled, so half-integers are exact) and its word.
struct TermKey {
  int twice_n_power = 0;
  Word word;
  auto operator<=>(const TermKey&) const = default;
};

inline int word_degree(const Word& w) {
  int d = 0;
  for (const auto& p : w) d += p.degree();
  return d;
}

inline void trim(Word& w) {
  while (!w.empty() && w.back() == ModePower{}) w.pop_back();
}

/// A single ladder operator in an arbitrary-order product.
struct Ladder {
  int mode = 0;
  bool dagger = false;
};

/// Coefficient * N^(twice_n_power/2) * (product of ladder operators, left to right).
struct LadderTerm {
  cplx coefficient{1.0};
  int twice_n_power = 0;
  std::vector<Ladder> ops;
};

using LadderSum = std::vector<LadderTerm>;

class OperatorPolynomial {
 public:
  using Terms = std::map<TermKey, cplx>;

  OperatorPolynomial() = default;

  static OperatorPolynomial scalar(cplx c, int twice_n_power = 0) {
    return monomial(c, twice_n_power, {});
  }
  static OperatorPolynomial identity() { return scalar(1.0); }

  static OperatorPolynomial monomial(cplx c, int twice_n_power, Word word) {
    OperatorPolynomial p;
    trim(word);
    p.add_term(TermKey{twice_n_power, std::move(word)}, c);
    return p;
  }

  /// c * N^(n/2) * (a_mode^dagger)^dag * a_mode^plain
  static OperatorPolynomial mode_monomial(int mode, int dag, int plain, cplx c = 1.0, int twice_n_power = 0) {
    Word w(static_cast<std::size_t>(mode) + 1);
    w[static_cast<std::size_t>(mode)] = {dag, plain};
    return monomial(c, twice_n_power, std::move(w));
  }
  static OperatorPolynomial annihilation(int mode) { return mode_monomial(mode, 0, 1); }
  static OperatorPolynomial creation(int mode) { return mode_monomial(mode, 1, 0); }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  int modes() const {
    std::size_t m = 0;
    for (const auto& [k, c] : terms_) m = std::max(m, k.word.size());
    return static_cast<int>(m);
  }

  int degree() const {
    int d = 0;
    for (const auto& [k, c] : terms_) d = std::max(d, word_degree(k.word));
    return d;
  }

  cplx coefficient(const TermKey& key) const {
    auto it = terms_.find(key);
    return it == terms_.end() ? cplx{} : it->second;
  }

  void add_term(const TermKey& key, cplx c) {
    if (c == cplx{}) return;
    auto [it, inserted] = terms_.try_emplace(key, c);
    if (!inserted) {
      it->second += c;
      if (it->second == cplx{}) terms_.erase(it);
    }
  }

  OperatorPolynomial& operator+=(const OperatorPolynomial& o) {
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
  }
  OperatorPolynomial& operator-=(const OperatorPolynomial& o) {
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
  }
  OperatorPolynomial& operator*=(cplx s) {
    if (s == cplx{}) {
      terms_.clear();
      return *this;
    }
    for (auto& [k, c] : terms_) c *= s;
    return *this;
  }

  friend OperatorPolynomial operator+(OperatorPolynomial a, const OperatorPolynomial& b) { return a += b; }
  friend OperatorPolynomial operator-(OperatorPolynomial a, const OperatorPolynomial& b) { return a -= b; }
  friend OperatorPolynomial operator*(OperatorPolynomial a, cplx s) { return a *= s; }
  friend OperatorPolynomial operator*(cplx s, OperatorPolynomial a) { return a *= s; }
  friend OperatorPolynomial operator-(OperatorPolynomial a) { return a *= -1.0; }

  /// Operator product, re-normal-ordered. N powers add.
  friend OperatorPolynomial operator*(const OperatorPolynomial& a, const OperatorPolynomial& b);

  /// Hermitian conjugate. The conjugate of a normal-ordered word is normal-ordered.
  OperatorPolynomial adjoint() const {
    OperatorPolynomial r;
    for (const auto& [k, c] : terms_) {
      TermKey key = k;
      for (auto& p : key.word) std::swap(p.dag, p.plain);
      r.add_term(key, std::conj(c));
    }
    return r;
  }

  /// Multiplies every term by N^(twice_delta/2).
  OperatorPolynomial scaled_by_n(int twice_delta) const {
    OperatorPolynomial r;
    for (const auto& [k, c] : terms_) r.add_term({k.twice_n_power + twice_delta, k.word}, c);
    return r;
  }

  friend bool operator==(const OperatorPolynomial&, const OperatorPolynomial&) = default;

 private:
  Terms terms_;
};

namespace detail {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// (a^+m1 a^n1)(a^+m2 a^n2) = sum_k C(n1,k) C(m2,k) k! a^+(m1+m2-k) a^(n1+n2-k)
inline std::vector<std::pair<double, ModePower>> mode_product(ModePower x, ModePower y) {
  std::vector<std::pair<double, ModePower>> out;
  const int kmax = std::min(x.plain, y.dag);
  for (int k = 0; k <= kmax; ++k) {
    const double w = binomial(x.plain, k) * binomial(y.dag, k) * factorial(k);
    out.push_back({w, {x.dag + y.dag - k, x.plain + y.plain - k}});
  }
  return out;
}

inline void word_product(const Word& a, const Word& b, std::size_t mode, double weight, Word& current,
                         std::vector<std::pair<double, Word>>& out) {
  const std::size_t m = std::max(a.size(), b.size());
  if (mode == m) {
    Word w = current;
    trim(w);
    out.push_back({weight, std::move(w)});
    return;
  }
  const ModePower x = mode < a.size() ? a[mode] : ModePower{};
  const ModePower y = mode < b.size() ? b[mode] : ModePower{};
  for (const auto& [w, p] : mode_product(x, y)) {
    current[mode] = p;
    word_product(a, b, mode + 1, weight * w, current, out);
  }
}

}  // namespace detail

inline OperatorPolynomial operator*(const OperatorPolynomial& a, const OperatorPolynomial& b) {
  OperatorPolynomial r;
  std::vector<std::pair<double, Word>> expansion;
  for (const auto& [ka, ca] : a.terms()) {
    for (const auto& [kb, cb] : b.terms()) {
      expansion.clear();
      Word current(std::max(ka.word.size(), kb.word.size()));
      detail::word_product(ka.word, kb.word, 0, 1.0, current, expansion);
      for (auto& [w, word] : expansion) r.add_term({ka.twice_n_power + kb.twice_n_power, std::move(word)}, ca * cb * w);
    }
  }
  return r;
}

inline OperatorPolynomial commutator(const OperatorPolynomial& a, const OperatorPolynomial& b) {
  return a * b - b * a;
}

/// Polynomials are normal-ordered by construction; this is the identity on them.
inline OperatorPolynomial normal_order(const OperatorPolynomial& p) { return p; }

/// Normal-orders an arbitrary sum of ladder-operator strings.
inline OperatorPolynomial normal_order(const LadderSum& sum) {
  OperatorPolynomial r;
  for (const auto& term : sum) {
    OperatorPolynomial acc = OperatorPolynomial::scalar(term.coefficient, term.twice_n_power);
    for (const auto& op : term.ops)
      acc = acc * (op.dagger ? OperatorPolynomial::creation(op.mode) : OperatorPolynomial::annihilation(op.mode));
    r += acc;
  }
  return r;
}

/// True when every creation operator sits left of every annihilation operator of the same mode.
inline bool is_normal_ordered(const std::vector<Ladder>& ops) {
  std::map<int, bool> seen_plain;
  for (const auto& op : ops) {
    if (op.dagger && seen_plain[op.mode]) return false;
    if (!op.dagger) seen_plain[op.mode] = true;
  }
  return true;
}

inline std::string to_string(const TermKey& key) {
  std::ostringstream os;
  if (key.twice_n_power != 0) {
    os << "N^";
    if (key.twice_n_power % 2 == 0) os << key.twice_n_power / 2;
    else os << "(" << key.twice_n_power << "/2)";
  }
  bool any = key.twice_n_power != 0;
  for (std::size_t m = 0; m < key.word.size(); ++m) {
    const auto& p = key.word[m];
    auto put = [&](const char* sym, int pow) {
      if (pow == 0) return;
      if (any) os << ' ';
      os << sym << m;
      if (pow > 1) os << '^' << pow;
      any = true;
    };
    put("a+", p.dag);
    put("a", p.plain);
  }
  if (!any) os << "1";
  return os.str();
}

inline std::string to_string(const OperatorPolynomial& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, c] : p.terms()) {
    if (!first) os << " + ";
    first = false;
    os << '(' << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i) " << to_string(k);
  }
  return os.str();
}

/// Adjoint Lindbladian acting on an observable:
/// i[H, O] + sum_k (L_k^+ O L_k - 1/2 {L_k^+ L_k, O}).
inline OperatorPolynomial adjoint_liouvillian(const OperatorPolynomial& h, const std::vector<OperatorPolynomial>& jumps,
                                              const OperatorPolynomial& o) {
  OperatorPolynomial r = I * commutator(h, o);
  for (const auto& l : jumps) {
    const OperatorPolynomial ld = l.adjoint();
    const OperatorPolynomial ldl = ld * l;
    r += ld * o * l;
    r -= 0.5 * (ldl * o + o * ldl);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gaussian moments and Wick evaluation

/// Normalized first moments alpha_i / sqrt(N) and fluctuation covariances
/// u_ij = <d_i d_j>, v_ij = <d_i^+ d_j> of an M-mode Gaussian state.
struct GaussianMoments {
  VectorXcd alpha;
  MatrixXcd u;
  MatrixXcd v;

  GaussianMoments() = default;
  explicit GaussianMoments(int modes)
      : alpha(VectorXcd::Zero(modes)), u(MatrixXcd::Zero(modes, modes)), v(MatrixXcd::Zero(modes, modes)) {}
  GaussianMoments(VectorXcd a, MatrixXcd uu, MatrixXcd vv) : alpha(std::move(a)), u(std::move(uu)), v(std::move(vv)) {}

  int modes() const { return static_cast<int>(alpha.size()); }

  static GaussianMoments vacuum(int modes) { return GaussianMoments(modes); }
};

/// Power series in sqrt(N): coefficient per exponent of sqrt(N) (i.e. doubled N power).
class NSeries {
 public:
  void add(int twice_power, cplx c) {
    if (c != cplx{}) coeff_[twice_power] += c;
  }
  cplx operator[](int twice_power) const {
    auto it = coeff_.find(twice_power);
    return it == coeff_.end() ? cplx{} : it->second;
  }
  cplx evaluate(double n) const {
    cplx s{};
    for (const auto& [p, c] : coeff_) s += c * std::pow(n, 0.5 * p);
    return s;
  }
  const std::map<int, cplx>& coefficients() const { return coeff_; }

  NSeries conj() const {
    NSeries r;
    for (const auto& [p, c] : coeff_) r.coeff_[p] = std::conj(c);
    return r;
  }
  friend NSeries operator*(const NSeries& a, const NSeries& b) {
    NSeries r;
    for (const auto& [pa, ca] : a.coeff_)
      for (const auto& [pb, cb] : b.coeff_) r.add(pa + pb, ca * cb);
    return r;
  }
  friend NSeries operator-(const NSeries& a, const NSeries& b) {
    NSeries r = a;
    for (const auto& [p, c] : b.coeff_) r.coeff_[p] -= c;
    return r;
  }

 private:
  std::map<int, cplx> coeff_;
};

namespace detail {

struct Fluct {
  int mode;
  bool dagger;
};

// Ordered two-point function <X_a X_b> of zero-mean fluctuations, a left of b.
inline cplx contraction(const Fluct& a, const Fluct& b, const GaussianMoments& g) {
  if (a.dagger && b.dagger) return std::conj(g.u(a.mode, b.mode));
  if (a.dagger && !b.dagger) return g.v(a.mode, b.mode);
  if (!a.dagger && !b.dagger) return g.u(a.mode, b.mode);
  return g.v(b.mode, a.mode) + (a.mode == b.mode ? 1.0 : 0.0);
}

// Wick's theorem: sum over ordered perfect pairings.
inline cplx wick(const std::vector<Fluct>& ops, const GaussianMoments& g) {
  const std::size_t n = ops.size();
  if (n == 0) return 1.0;
  if (n % 2 == 1) return 0.0;
  cplx total{};
  std::vector<Fluct> rest;
  rest.reserve(n - 2);
  for (std::size_t j = 1; j < n; ++j) {
    const cplx c = contraction(ops[0], ops[j], g);
    if (c == cplx{}) continue;
    rest.clear();
    for (std::size_t k = 1; k < n; ++k)
      if (k != j) rest.push_back(ops[k]);
    total += c * wick(rest, g);
  }
  return total;
}

}  // namespace detail

/// <p> on the Gaussian state with moments g, as a series in sqrt(N).
/// Each a_i is replaced by sqrt(N) alpha_i + d_i and fluctuation strings are Wick-contracted.
inline NSeries gaussian_expectation(const OperatorPolynomial& p, const GaussianMoments& g) {
  NSeries out;
  const int m = g.modes();
  for (const auto& [key, coeff] : p.terms()) {
    if (static_cast<int>(key.word.size()) > m)
      throw Error("gaussian_expectation: polynomial acts on more modes than the state has");
    // Enumerate per-mode choices (r_i creation fluctuations, s_i annihilation fluctuations).
    const std::size_t nm = key.word.size();
    std::vector<int> r(nm, 0), s(nm, 0);
    auto recurse = [&](auto&& self, std::size_t mode, cplx weight, int sqrt_n_power) -> void {
      if (mode == nm) {
        std::vector<detail::Fluct> ops;
        for (std::size_t i = 0; i < nm; ++i)
          for (int k = 0; k < r[i]; ++k) ops.push_back({static_cast<int>(i), true});
        for (std::size_t i = 0; i < nm; ++i)
          for (int k = 0; k < s[i]; ++k) ops.push_back({static_cast<int>(i), false});
        const cplx w = detail::wick(ops, g);
        out.add(key.twice_n_power + sqrt_n_power, coeff * weight * w);
        return;
      }
      const auto pw = key.word[mode];
      const cplx a = g.alpha(static_cast<Eigen::Index>(mode));
      for (int ri = 0; ri <= pw.dag; ++ri) {
        for (int si = 0; si <= pw.plain; ++si) {
          r[mode] = ri;
          s[mode] = si;
          const cplx w = detail::binomial(pw.dag, ri) * detail::binomial(pw.plain, si) *
                         std::pow(std::conj(a), pw.dag - ri) * std::pow(a, pw.plain - si);
          self(self, mode + 1, weight * w, sqrt_n_power + (pw.dag - ri) + (pw.plain - si));
        }
      }
    };
    recurse(recurse, 0, 1.0, 0);
  }
  return out;
}

/// Numeric-N overload.
inline cplx gaussian_expectation(const OperatorPolynomial& p, const GaussianMoments& g, double n) {
  return gaussian_expectation(p, g).evaluate(n);
}

/// Strings given in arbitrary order must already be normal-ordered to be evaluated.
inline NSeries gaussian_expectation(const LadderSum& sum, const GaussianMoments& g) {
  for (const auto& t : sum)
    if (!is_normal_ordered(t.ops)) throw Error("gaussian_expectation: input is not normal-ordered");
  return gaussian_expectation(normal_order(sum), g);
}

// ---------------------------------------------------------------------------
// Generated thermodynamic-limit right-hand sides

/// Time derivatives of (alpha, u, v).
struct MomentDerivative {
  VectorXcd dalpha;
  MatrixXcd du;
  MatrixXcd dv;
};

/// Checks <H> ~ N and <L> ~ sqrt(N): every H term carries N^(1-(m+n)/2), every L term N^(1/2-(m+n)/2).
inline void check_extensive(const OperatorPolynomial& h, const std::vector<OperatorPolynomial>& jumps) {
  for (const auto& [k, c] : h.terms())
    if (k.twice_n_power != 2 - word_degree(k.word))
      throw ExtensivityError("non-extensive Hamiltonian term: " + to_string(k));
  for (std::size_t j = 0; j < jumps.size(); ++j)
    for (const auto& [k, c] : jumps[j].terms())
      if (k.twice_n_power != 1 - word_degree(k.word))
        throw ExtensivityError("non-extensive jump operator " + std::to_string(j) + " term: " + to_string(k));
}

/// Deterministic N -> infinity equations generated symbolically from (H, {L_k}).
/// Polynomials are prepared once; evaluation contracts them with the Gaussian moments
/// and keeps only the N^0 part. Upsilon is taken lazily from `upsilon()` per channel.
class GeneratedRhs {
 public:
  GeneratedRhs(OperatorPolynomial h, std::vector<OperatorPolynomial> jumps, int modes, UnravelingScheme scheme)
      : modes_(modes), scheme_(scheme), jumps_(std::move(jumps)) {
    check_extensive(h, jumps_);
    const auto m = static_cast<std::size_t>(modes);
    l_a_.resize(m);
    l_aa_.assign(m, std::vector<OperatorPolynomial>(m));
    l_ada_.assign(m, std::vector<OperatorPolynomial>(m));
    a_l_.assign(m, std::vector<OperatorPolynomial>(jumps_.size()));
    ld_a_.assign(m, std::vector<OperatorPolynomial>(jumps_.size()));
    for (int i = 0; i < modes; ++i) {
      const auto ai = OperatorPolynomial::annihilation(i);
      l_a_[i] = adjoint_liouvillian(h, jumps_, ai);
      for (int j = 0; j < modes; ++j) {
        const auto aj = OperatorPolynomial::annihilation(j);
        l_aa_[i][j] = adjoint_liouvillian(h, jumps_, ai * aj);
        l_ada_[i][j] = adjoint_liouvillian(h, jumps_, ai.adjoint() * aj);
      }
      for (std::size_t k = 0; k < jumps_.size(); ++k) {
        a_l_[i][k] = ai * jumps_[k];
        ld_a_[i][k] = jumps_[k].adjoint() * ai;
      }
    }
  }

  int modes() const { return modes_; }
  const UnravelingScheme& scheme() const { return scheme_; }

  MomentDerivative operator()(const GaussianMoments& g) const {
    const int m = modes_;
    const std::size_t nk = jumps_.size();
    MomentDerivative d{VectorXcd::Zero(m), MatrixXcd::Zero(m, m), MatrixXcd::Zero(m, m)};

    std::vector<NSeries> la(m);
    for (int i = 0; i < m; ++i) {
      la[i] = gaussian_expectation(l_a_[i], g);
      d.dalpha(i) = la[i][1];  // N^(1/2) coefficient of <L^+ a_i>, divided by sqrt(N)
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        d.du(i, j) = gaussian_expectation(l_aa_[i][j], g)[0] - g.alpha(i) * la[j][-1] - g.alpha(j) * la[i][-1];
        d.dv(i, j) = gaussian_expectation(l_ada_[i][j], g)[0] - std::conj(g.alpha(i)) * la[j][-1] -
                     g.alpha(j) * std::conj(la[i][-1]);
      }
    }

    // Ito products of the measurement terms: <dH^+ a_i> = sum_k dZ_k^* A_ik + dZ_k B_ik.
    MatrixXcd a(m, static_cast<Eigen::Index>(nk)), b(m, static_cast<Eigen::Index>(nk));
    std::vector<cplx> ups(nk);
    for (std::size_t k = 0; k < nk; ++k) {
      const NSeries lk = gaussian_expectation(jumps_[k], g);
      ups[k] = upsilon(scheme_, lk[1]);
      for (int i = 0; i < m; ++i) {
        NSeries ai;
        ai.add(1, g.alpha(i));
        a(i, static_cast<Eigen::Index>(k)) = (gaussian_expectation(a_l_[i][k], g) - ai * lk)[0];
        b(i, static_cast<Eigen::Index>(k)) = (gaussian_expectation(ld_a_[i][k], g) - lk.conj() * ai)[0];
      }
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        cplx nu{}, nv{};
        for (std::size_t k = 0; k < nk; ++k) {
          const auto kk = static_cast<Eigen::Index>(k);
          const cplx y = ups[k];
          nu += std::conj(y) * a(i, kk) * a(j, kk) + y * b(i, kk) * b(j, kk) + a(i, kk) * b(j, kk) +
                b(i, kk) * a(j, kk);
          nv += std::conj(a(i, kk)) * a(j, kk) + y * std::conj(a(i, kk)) * b(j, kk) +
                std::conj(y) * std::conj(b(i, kk)) * a(j, kk) + std::conj(b(i, kk)) * b(j, kk);
        }
        d.du(i, j) -= nu;
        d.dv(i, j) -= nv;
      }
    }
    return d;
  }

 private:
  int modes_;
  UnravelingScheme scheme_;
  std::vector<OperatorPolynomial> jumps_;
  std::vector<OperatorPolynomial> l_a_;
  std::vector<std::vector<OperatorPolynomial>> l_aa_, l_ada_, a_l_, ld_a_;
};

inline GeneratedRhs thermodynamic_rhs(const OperatorPolynomial& h, const std::vector<OperatorPolynomial>& jumps,
                                      int modes, const UnravelingScheme& scheme) {
  return GeneratedRhs(h, jumps, modes, scheme);
}

}  // namespace mfent
