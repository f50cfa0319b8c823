#pragma once

// The five scenario commands. Each takes a validated config and returns the tables
// it would write; write_outputs() puts them on disk as <out>/<table name>.csv.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mfent/exact/dicke.hpp"
#include "mfent/exact/ensemble.hpp"
#include "mfent/exact/moments.hpp"
#include "mfent/exact/space.hpp"
#include "mfent/flow/fixed_points.hpp"
#include "mfent/flow/kerr.hpp"
#include "mfent/flow/spin.hpp"
#include "mfent/flow/sweep.hpp"
#include "mfent/gstate.hpp"
#include "mfent/harness/config.hpp"
#include "mfent/harness/table.hpp"
#include "mfent/rng.hpp"

namespace mfent::harness {

struct RunContext {
  std::uint64_t seed = 0;
  int threads = 1;
};

struct Report {
  std::vector<Table> tables;
  std::vector<std::string> notes;  // human-readable summary lines

  const Table& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw Error("report has no table '" + name + "'");
  }
};

inline void write_outputs(const Report& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : r.tables) write_csv((dir / (t.name + ".csv")).string(), t);
  if (!r.notes.empty()) {
    std::ofstream s(dir / "summary.txt");
    for (const auto& n : r.notes) s << n << '\n';
  }
}

namespace detail {

inline std::string idx(int i, int j) { return std::to_string(i + 1) + std::to_string(j + 1); }

inline std::vector<std::string> kerr_columns(int modes) {
  std::vector<std::string> c{"t"};
  for (int i = 0; i < modes; ++i) {
    c.push_back("re_alpha_" + std::to_string(i + 1));
    c.push_back("im_alpha_" + std::to_string(i + 1));
  }
  for (int i = 0; i < modes; ++i)
    for (int j = i; j < modes; ++j) {
      c.push_back("re_u_" + idx(i, j));
      c.push_back("im_u_" + idx(i, j));
    }
  for (int i = 0; i < modes; ++i)
    for (int j = i; j < modes; ++j) {
      c.push_back("re_v_" + idx(i, j));
      c.push_back("im_v_" + idx(i, j));
    }
  if (modes == 2) {
    c.push_back("S_E_spatial");
    c.push_back("S_E_momentum");
  }
  c.push_back("purity_defect");
  return c;
}

inline std::vector<Cell> kerr_row(double t, const GaussianMoments& g) {
  const int m = g.modes();
  std::vector<Cell> r{t};
  for (int i = 0; i < m; ++i) {
    r.push_back(g.alpha(i).real());
    r.push_back(g.alpha(i).imag());
  }
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      r.push_back(g.u(i, j).real());
      r.push_back(g.u(i, j).imag());
    }
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      r.push_back(g.v(i, j).real());
      r.push_back(g.v(i, j).imag());
    }
  if (m == 2) {
    r.push_back(entanglement_entropy(g, Partition{{0}}));
    r.push_back(entanglement_entropy(mode_transform(g, balanced_beamsplitter()), Partition{{0}}));
  }
  r.push_back(purity_defect(g));
  return r;
}

inline const std::vector<std::string> kSpinColumns{"t",    "theta", "phi", "m_x", "m_y",           "m_z",
                                                   "re_u", "im_u",  "v",   "S_E", "purity_defect"};

inline std::vector<Cell> spin_row(double t, const SpinFrame& f) {
  const Eigen::Vector3d m = f.magnetization();
  return {t, f.theta, f.phi, m.x(), m.y(), m.z(), f.u.real(), f.u.imag(), f.v, collective_entropy(std::max(f.v, 0.0)),
          purity_defect(f.moments())};
}

inline std::string stability_name(flow::Stability s) { return std::string(flow::to_string(s)); }

}  // namespace detail

// ---- flow ------------------------------------------------------------------------------------

inline Report run_flow(const Config& c, const RunContext& = {}) {
  const double t_max = c.number("t_max"), dt_out = c.number("dt_out");
  positive(c, "t_max", t_max);
  positive(c, "dt_out", dt_out);
  const UnravelingScheme s = scheme(c);
  const auto opts = flow_options(c);
  Table t{"flow", {}, {}};
  if (model_kind(c) == ModelKind::Spin) {
    const SpinModel m = spin_model(c);
    t.columns = detail::kSpinColumns;
    for (const auto& smp : flow::integrate(m, s, spin_initial(c), t_max, dt_out, opts))
      t.add_row(detail::spin_row(smp.t, smp.frame));
  } else {
    const KerrModel m = kerr_model(c);
    t.columns = detail::kerr_columns(m.modes());
    for (const auto& smp : flow::integrate(m, s, kerr_initial(c, m.modes()), t_max, dt_out, opts))
      t.add_row(detail::kerr_row(smp.t, smp.g));
  }
  return {{t}, {}};
}

// ---- steady ----------------------------------------------------------------------------------

inline Report run_steady(const Config& c, const RunContext& ctx = {}) {
  const UnravelingScheme s = scheme(c);
  Report rep;
  if (model_kind(c) == ModelKind::Spin) {
    const SpinModel m = spin_model(c);
    if (m.omega >= m.kappa)
      throw Error("no stationary state for Omega >= kappa: the magnetization oscillates (use 'flow' or 'sweep')");
    const SpinSteadyState ss = spin_steady_state(m.omega, m.kappa);
    flow::FixedPointOptions fpo;
    fpo.ode = flow_options(c).ode;
    const auto found = flow::find_fixed_points(m, s, {ss.frame()}, fpo);
    if (found.points.empty()) throw Error("stationary point not confirmed: " + found.failures.front());
    const auto& p = found.points.front();
    Table t{"steady", {"branch", "stability", "leading_eigenvalue", "theta", "phi", "m_x", "m_y", "m_z", "re_u", "im_u",
                       "v", "S_E", "closed_form_S_E"},
            {}};
    const Eigen::Vector3d mm = p.frame.magnetization();
    t.add_row({0LL, detail::stability_name(p.stability), p.leading_eigenvalue, p.frame.theta, p.frame.phi, mm.x(), mm.y(),
               mm.z(), p.frame.u.real(), p.frame.u.imag(), p.frame.v, collective_entropy(std::max(p.frame.v, 0.0)),
               ss.entropy});
    rep.tables.push_back(t);
    return rep;
  }
  KerrModel m = kerr_model(c);
  flow::SweepOptions so;
  so.threads = ctx.threads;
  so.fixed_point.ode = flow_options(c).ode;
  const auto r = flow::sweep_bifurcation(m, s, "F", {m.drive[0]}, so);
  Table t{"steady", {"branch", "stability", "leading_eigenvalue"}, {}};
  for (int i = 0; i < m.modes(); ++i) t.columns.push_back("n_" + std::to_string(i + 1));
  const auto base = detail::kerr_columns(m.modes());
  t.columns.insert(t.columns.end(), base.begin() + 1, base.end());
  for (const auto& row : r.rows) {
    std::vector<Cell> cells{static_cast<long long>(row.branch), detail::stability_name(row.stability),
                            row.leading_eigenvalue};
    for (double n : row.occupations) cells.push_back(n);
    if (!row.covariances_found) {
      rep.notes.push_back("branch " + std::to_string(row.branch) + ": covariances not found");
      continue;
    }
    const auto rest = detail::kerr_row(0.0, row.moments);
    cells.insert(cells.end(), rest.begin() + 1, rest.end());
    t.add_row(cells);
  }
  rep.notes.insert(rep.notes.end(), r.warnings.begin(), r.warnings.end());
  rep.tables.push_back(t);
  return rep;
}

// ---- sweep -----------------------------------------------------------------------------------

namespace detail {

struct SpinSweepPoint {
  std::string phase;
  double m_z = 0.0;
  double entropy = 0.0;
};

// Stationary closed form below kappa; time average of the flow over [from, to] otherwise.
inline SpinSweepPoint spin_sweep_point(const SpinModel& m, const UnravelingScheme& s, const SpinFrame& init, double from,
                                       double to, const flow::FlowOptions& opts) {
  if (m.omega < m.kappa) {
    const SpinSteadyState ss = spin_steady_state(m.omega, m.kappa);
    return {"stationary", ss.m.z(), ss.entropy};
  }
  const double dt = 0.5;
  SpinSweepPoint p{"oscillating", 0.0, 0.0};
  int n = 0;
  for (const auto& smp : flow::integrate(m, s, init, to, dt, opts)) {
    if (smp.t < from - 1e-9) continue;
    p.m_z += smp.m.z();
    p.entropy += collective_entropy(std::max(smp.frame.v, 0.0));
    ++n;
  }
  p.m_z /= n;
  p.entropy /= n;
  return p;
}

}  // namespace detail

inline Report run_sweep(const Config& c, const RunContext& ctx = {}) {
  const auto grid = sweep_grid(c);
  const auto list = schemes(c);
  Report rep;
  if (model_kind(c) == ModelKind::Spin) {
    SpinModel m = spin_model(c);
    const std::string param = c.string("sweep_param", "omega");
    if (param != "omega") throw ConfigError(c.origin() + ": spin sweeps vary 'omega'");
    const double from = c.number("average_from", 3000.0), to = c.number("average_to", 4000.0);
    if (!(to > from) || from < 0.0) throw ConfigError(c.origin() + ": need 0 <= average_from < average_to");
    for (double w : grid)
      if (w < 0.0) throw ConfigError(c.origin() + ": omega grid must be nonnegative");
    Table t{"sweep", {"scheme", "omega", "phase", "m_z", "S_E"}, {}};
    for (const auto& s : list) {
      for (double w : grid) {
        m.omega = w;
        const auto p = detail::spin_sweep_point(m, s, spin_initial(c), from, to, flow_options(c));
        t.add_row({std::string(to_string(s.tag)), w, p.phase, p.m_z, p.entropy});
      }
    }
    rep.tables.push_back(t);
    return rep;
  }
  const KerrModel m = kerr_model(c);
  const std::string param = c.string("sweep_param", "F");
  flow::SweepOptions so;
  so.threads = ctx.threads;
  so.fixed_point.ode = flow_options(c).ode;
  Table rows{"sweep", {"scheme", param, "branch", "stability", "leading_eigenvalue"}, {}};
  for (int i = 0; i < m.modes(); ++i) rows.columns.push_back("n_" + std::to_string(i + 1));
  rows.columns.insert(rows.columns.end(), {"S_E_spatial", "S_E_momentum", "symmetric"});
  Table crit{"critical", {"scheme", "kind", param, "branch", "lower", "upper"}, {}};
  for (const auto& s : list) {
    flow::SweepResult r;
    try {
      r = flow::sweep_bifurcation(m, s, param, grid, so);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      // Bad grids and parameter names are configuration problems.
      const std::string what = e.what();
      if (what.find("grid") != std::string::npos || what.find("unknown") != std::string::npos)
        throw ConfigError(c.origin() + ": " + what);
      throw;
    }
    const std::string name(to_string(s.tag));
    for (const auto& row : r.rows) {
      std::vector<Cell> cells{name, row.param, static_cast<long long>(row.branch), detail::stability_name(row.stability),
                              row.leading_eigenvalue};
      for (double n : row.occupations) cells.push_back(n);
      cells.insert(cells.end(), {row.entropy_spatial, row.entropy_momentum, row.symmetric ? 1LL : 0LL});
      rows.add_row(cells);
    }
    for (const auto& cp : r.critical)
      crit.add_row({name, std::string("stability_change"), cp.param, static_cast<long long>(cp.branch), cp.lower, cp.upper});
    // Kinks of the stable-branch entropies.
    if (m.modes() == 2) {
      const auto series = flow::stable_series(r);
      std::vector<double> ps, es, em;
      for (std::size_t k = 0; k < series.size(); ++k) {
        if (!series[k]) continue;
        ps.push_back(r.grid[k]);
        es.push_back(series[k]->entropy_spatial);
        em.push_back(series[k]->entropy_momentum);
      }
      if (ps.size() >= 3) {
        const double ks = flow::second_difference_argmax(ps, es), km = flow::second_difference_argmax(ps, em);
        crit.add_row({name, std::string("kink_S_E_spatial"), ks, -1LL, ks, ks});
        crit.add_row({name, std::string("kink_S_E_momentum"), km, -1LL, km, km});
      }
    }
    for (const auto& w : r.warnings) rep.notes.push_back(name + ": " + w);
  }
  rep.tables.push_back(rows);
  rep.tables.push_back(crit);
  return rep;
}

// ---- exact and bench -------------------------------------------------------------------------

namespace detail {

struct ExactSetup {
  exact::ExactModel model;
  VectorXcd psi0;
  std::vector<exact::Observable> observables;
};

inline exact::TrajectoryOptions trajectory_options(const Config& c) {
  exact::TrajectoryOptions o;
  o.t_max = c.number("t_max");
  o.dt_out = c.number("dt_out");
  positive(c, "t_max", o.t_max);
  positive(c, "dt_out", o.dt_out);
  o.dt = c.number("dt", o.dt);
  positive(c, "dt", o.dt);
  o.norm_drift_tol = c.number("norm_drift_tol", o.norm_drift_tol);
  const std::string timing = c.string("jump_timing", "waiting_time");
  if (timing == "fixed_step") o.timing = exact::JumpTiming::FixedStep;
  else if (timing != "waiting_time") throw ConfigError(c.origin() + ": unknown jump_timing '" + timing + "'");
  return o;
}

// Largest |alpha~_i|^2 along the mean-field trajectory, for the default cutoff.
inline double peak_occupation(const KerrModel& m, const GaussianMoments& init, double t_max) {
  double peak = init.alpha.cwiseAbs2().maxCoeff();
  for (const auto& a : flow::integrate_mean_field(m, init.alpha, t_max, t_max / 200.0))
    peak = std::max(peak, a.cwiseAbs2().maxCoeff());
  return peak;
}

inline ExactSetup kerr_setup(const Config& c, const KerrModel& m, double n) {
  if (!(n > 0.0)) throw ConfigError(c.origin() + ": sizes must be positive");
  const GaussianMoments init = kerr_initial(c, m.modes());
  const int cutoff = c.has("cutoff") ? static_cast<int>(c.integer("cutoff"))
                                     : exact::default_cutoff(n, peak_occupation(m, init, c.number("t_max")));
  if (cutoff < 2) throw ConfigError(c.origin() + ": cutoff must be at least 2");
  ExactSetup s;
  s.model = exact::kerr_exact_model(m, n, std::vector<int>(m.modes(), cutoff));
  s.psi0 = exact::coherent_state(s.model.basis, init.alpha * std::sqrt(n));
  const exact::Basis b = s.model.basis;
  for (int i = 0; i < m.modes(); ++i) {
    const exact::SpMat a = exact::annihilation(b, i);
    const std::string k = std::to_string(i + 1);
    s.observables.push_back({"n_" + k, [a, n](const VectorXcd& p) { return (a * p).squaredNorm() / n; }});
    s.observables.push_back({"re_alpha_" + k, [a, n](const VectorXcd& p) { return p.dot(a * p).real() / std::sqrt(n); }});
    s.observables.push_back({"im_alpha_" + k, [a, n](const VectorXcd& p) { return p.dot(a * p).imag() / std::sqrt(n); }});
    s.observables.push_back({"v_" + k + k, [a](const VectorXcd& p) {
                               const cplx al = p.dot(a * p);
                               return (a * p).squaredNorm() - std::norm(al);
                             }});
  }
  if (m.modes() == 1)
    s.observables.push_back({"delta_G", [b](const VectorXcd& p) { return exact::non_gaussianity(b, p); }});
  return s;
}

inline ExactSetup spin_setup(const Config& c, const SpinModel& m, double size) {
  const int twice = static_cast<int>(std::lround(2.0 * size));
  if (twice < 1 || std::abs(twice - 2.0 * size) > 1e-9) throw ConfigError(c.origin() + ": spin sizes must be multiples of 1/2");
  ExactSetup s;
  s.model = exact::spin_exact_model(m, twice);
  const SpinFrame init = spin_initial(c);
  s.psi0 = exact::spin_coherent_state(s.model.basis, init.theta, init.phi);
  const exact::Basis b = s.model.basis;
  const exact::SpMat sp = exact::spin_raising(b);
  const exact::SpMat sz = exact::spin_z(b);
  const double sc = s.model.size;
  s.observables.push_back({"m_x", [sp, sc](const VectorXcd& p) { return p.dot(sp * p).real() / sc; }});
  s.observables.push_back({"m_y", [sp, sc](const VectorXcd& p) { return p.dot(sp * p).imag() / sc; }});
  s.observables.push_back({"m_z", [sz, sc](const VectorXcd& p) { return p.dot(sz * p).real() / sc; }});
  if (twice % 2 == 0)
    s.observables.push_back({"S_E", [b](const VectorXcd& p) { return exact::dicke_half_entropy(b, p); }});
  return s;
}

inline ExactSetup exact_setup(const Config& c, double size) {
  if (model_kind(c) == ModelKind::Spin) return spin_setup(c, spin_model(c), size);
  return kerr_setup(c, kerr_model(c), size);
}

inline std::uint64_t size_seed(std::uint64_t seed, std::size_t k) { return splitmix64(seed + 0x9E37u * (k + 1)); }

inline exact::EnsembleStats run_ensemble(const Config& c, const ExactSetup& s, const UnravelingScheme& scheme,
                                         std::uint64_t seed, int threads, bool keep) {
  exact::EnsembleConfig ec;
  ec.scheme = scheme;
  ec.trajectory = trajectory_options(c);
  ec.trajectories = static_cast<int>(c.integer("n_traj"));
  if (ec.trajectories < 1) throw ConfigError(c.origin() + ": n_traj must be at least 1");
  ec.seed = seed;
  ec.threads = threads;
  ec.keep_values = keep;
  return exact::ensemble_run(s.model, s.psi0, s.observables, ec);
}

inline std::vector<double> sizes(const Config& c) {
  const auto v = c.list("sizes");
  if (v.empty()) throw ConfigError(c.origin() + ": key 'sizes' is empty");
  return v;
}

}  // namespace detail

inline Report run_exact(const Config& c, const RunContext& ctx = {}) {
  const auto sz = detail::sizes(c);
  if (sz.size() != 1) throw ConfigError(c.origin() + ": 'exact' runs one size; use 'bench' for a list");
  const UnravelingScheme s = scheme(c);
  const auto setup = detail::exact_setup(c, sz[0]);
  const bool keep = c.flag("per_trajectory", false);
  const auto st = detail::run_ensemble(c, setup, s, detail::size_seed(ctx.seed, 0), ctx.threads, keep);
  Report rep;
  Table t{"exact", {"t"}, {}};
  for (const auto& o : setup.observables) {
    t.columns.push_back("mean_" + o.name);
    t.columns.push_back("std_" + o.name);
  }
  t.columns.push_back("n_traj");
  for (std::size_t i = 0; i < st.times.size(); ++i) {
    std::vector<Cell> row{st.times[i]};
    for (std::size_t o = 0; o < setup.observables.size(); ++o) {
      row.push_back(st.mean(o, i));
      row.push_back(st.stddev(o, i));
    }
    row.push_back(static_cast<long long>(st.trajectories));
    t.add_row(row);
  }
  rep.tables.push_back(t);
  if (keep) {
    Table per{"trajectories", {"trajectory", "t"}, {}};
    for (const auto& o : setup.observables) per.columns.push_back(o.name);
    for (std::size_t k = 0; k < st.values.size(); ++k) {
      if (st.values[k].empty()) continue;
      for (std::size_t i = 0; i < st.times.size(); ++i) {
        std::vector<Cell> row{static_cast<long long>(k), st.times[i]};
        for (std::size_t o = 0; o < setup.observables.size(); ++o) row.push_back(st.values[k][o * st.times.size() + i]);
        per.add_row(row);
      }
    }
    rep.tables.push_back(per);
    rep.notes.push_back("per-trajectory dump: " + std::to_string(per.rows.size()) + " rows");
  }
  for (const auto& f : st.failures) rep.notes.push_back("failed " + f);
  rep.notes.push_back("mean jumps per trajectory: " + std::to_string(st.mean_jumps));
  return rep;
}

/// Per-size deviation metrics of trajectory ensembles from the deterministic flow.
struct BenchMetrics {
  std::string scheme;
  double size = 0.0;
  int trajectories = 0;
  double dev_n = 0.0;           // Kerr: max_t |mean n_i/N - |alpha~_i|^2|
  double dev_v = 0.0;           // Kerr: max_t |mean v_ii - v_ii(flow)|
  double std_n = 0.0;           // Kerr: time-averaged ensemble std of n_i/N
  double delta_g = std::numeric_limits<double>::quiet_NaN();  // single Kerr: time-averaged mean delta_G
  double dev_m = 0.0;           // spin: max_t |mean m_z - m_z(flow)|
  double std_m = 0.0;           // spin: time-averaged ensemble std of m_z
  double entropy_final = std::numeric_limits<double>::quiet_NaN();  // spin: mean S_E at t_max
  double entropy_final_se = std::numeric_limits<double>::quiet_NaN();
  double entropy_flow = std::numeric_limits<double>::quiet_NaN();   // spin: flow S_E at t_max
  double dev_entropy = std::numeric_limits<double>::quiet_NaN();    // spin: |entropy_final - entropy_flow|
};

/// "pass" if strictly decreasing along sizes, "fail" otherwise, "n/a" for fewer than two sizes.
inline std::string monotone_verdict(const std::vector<double>& v) {
  if (v.size() < 2) return "n/a";
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return "fail";
  return "pass";
}

inline Report run_bench(const Config& c, const RunContext& ctx = {}) {
  const auto sz = detail::sizes(c);
  const auto list = schemes(c);
  const double t_max = c.number("t_max"), dt_out = c.number("dt_out");
  const bool spin = model_kind(c) == ModelKind::Spin;
  Report rep;
  std::vector<BenchMetrics> all;
  for (const auto& s : list) {
    const std::string name(to_string(s.tag));
    // Deterministic reference on the same output grid.
    std::vector<GaussianMoments> ref_g;
    std::vector<SpinFrame> ref_s;
    if (spin) {
      for (const auto& smp : flow::integrate(spin_model(c), s, spin_initial(c), t_max, dt_out, flow_options(c)))
        ref_s.push_back(smp.frame);
    } else {
      const KerrModel m = kerr_model(c);
      for (const auto& smp : flow::integrate(m, s, kerr_initial(c, m.modes()), t_max, dt_out, flow_options(c)))
        ref_g.push_back(smp.g);
    }
    for (std::size_t k = 0; k < sz.size(); ++k) {
      const auto setup = detail::exact_setup(c, sz[k]);
      const auto st = detail::run_ensemble(c, setup, s, detail::size_seed(ctx.seed, k), ctx.threads, false);
      const std::size_t nt = st.times.size();
      if (nt != (spin ? ref_s.size() : ref_g.size())) throw Error("bench: flow and ensemble output grids differ");
      BenchMetrics b;
      b.scheme = name;
      b.size = sz[k];
      b.trajectories = st.trajectories;
      if (spin) {
        const int mz = st.index("m_z");
        for (std::size_t i = 0; i < nt; ++i) {
          b.dev_m = std::max(b.dev_m, std::abs(st.mean(mz, i) - ref_s[i].magnetization().z()));
          b.std_m += st.stddev(mz, i) / nt;
        }
        b.entropy_flow = collective_entropy(std::max(ref_s.back().v, 0.0));
        if (std::find(st.names.begin(), st.names.end(), "S_E") != st.names.end()) {
          b.entropy_final = st.mean(st.index("S_E"), nt - 1);
          b.entropy_final_se = st.standard_error(st.index("S_E"), nt - 1);
          b.dev_entropy = std::abs(b.entropy_final - b.entropy_flow);
        }
      } else {
        const int modes = ref_g.front().modes();
        for (int q = 0; q < modes; ++q) {
          const std::string kq = std::to_string(q + 1);
          const int on = st.index("n_" + kq), ov = st.index("v_" + kq + kq);
          for (std::size_t i = 0; i < nt; ++i) {
            b.dev_n = std::max(b.dev_n, std::abs(st.mean(on, i) - std::norm(ref_g[i].alpha(q))));
            b.dev_v = std::max(b.dev_v, std::abs(st.mean(ov, i) - ref_g[i].v(q, q).real()));
            b.std_n += st.stddev(on, i) / (nt * modes);
          }
        }
        if (modes == 1) {
          const int od = st.index("delta_G");
          b.delta_g = 0.0;
          for (std::size_t i = 0; i < nt; ++i) b.delta_g += st.mean(od, i) / nt;
        }
      }
      all.push_back(b);
      for (const auto& f : st.failures) rep.notes.push_back(name + " size " + std::to_string(sz[k]) + ": failed " + f);
    }
  }

  Table t{"bench", {"scheme", "size", "n_traj"}, {}};
  if (spin) t.columns.insert(t.columns.end(), {"dev_m_z", "std_m_z", "S_E_final", "se_S_E_final", "S_E_flow", "dev_S_E"});
  else t.columns.insert(t.columns.end(), {"dev_n", "dev_v", "std_n", "delta_G"});
  for (const auto& b : all) {
    std::vector<Cell> row{b.scheme, b.size, static_cast<long long>(b.trajectories)};
    if (spin) row.insert(row.end(), {b.dev_m, b.std_m, b.entropy_final, b.entropy_final_se, b.entropy_flow, b.dev_entropy});
    else row.insert(row.end(), {b.dev_n, b.dev_v, b.std_n, b.delta_g});
    t.add_row(row);
  }
  Table v{"verdicts", {"scheme", "metric", "verdict"}, {}};
  for (const auto& s : list) {
    const std::string name(to_string(s.tag));
    std::vector<const BenchMetrics*> mine;
    for (const auto& b : all)
      if (b.scheme == name) mine.push_back(&b);
    auto series = [&](auto field) {
      std::vector<double> out;
      for (const auto* b : mine) out.push_back(field(*b));
      return out;
    };
    std::vector<std::pair<std::string, std::vector<double>>> metrics;
    if (spin) {
      metrics = {{"dev_S_E", series([](const BenchMetrics& b) { return b.dev_entropy; })},
                 {"dev_m_z", series([](const BenchMetrics& b) { return b.dev_m; })},
                 {"std_m_z", series([](const BenchMetrics& b) { return b.std_m; })}};
    } else {
      metrics = {{"dev_n", series([](const BenchMetrics& b) { return b.dev_n; })},
                 {"dev_v", series([](const BenchMetrics& b) { return b.dev_v; })},
                 {"std_n", series([](const BenchMetrics& b) { return b.std_n; })}};
      if (!std::isnan(mine.front()->delta_g))
        metrics.push_back({"delta_G", series([](const BenchMetrics& b) { return b.delta_g; })});
    }
    for (const auto& [metric, values] : metrics) {
      const std::string verdict = monotone_verdict(values);
      v.add_row({name, metric, verdict});
      rep.notes.push_back(name + " " + metric + " decreasing in size: " + verdict);
    }
  }
  rep.tables.push_back(t);
  rep.tables.push_back(v);
  return rep;
}

/// Dispatch by subcommand name.
inline Report run_command(const std::string& command, const Config& c, const RunContext& ctx) {
  if (command == "flow") return run_flow(c, ctx);
  if (command == "steady") return run_steady(c, ctx);
  if (command == "sweep") return run_sweep(c, ctx);
  if (command == "exact") return run_exact(c, ctx);
  if (command == "bench") return run_bench(c, ctx);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace mfent::harness
