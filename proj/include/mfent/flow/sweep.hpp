#pragma once

// Parameter continuation of Kerr-network fixed points.
//
// Two passes. The first walks the grid serially and tracks mean-field roots only: every
// known branch is continued by Newton from its previous root, and unstable roots are kicked
// along their leading unstable eigenvector (both signs) and relaxed to discover the
// attractors they feed, e.g. the symmetry-broken pair past a pitchfork. The second pass
// is independent per (grid point, branch) and runs in parallel: covariance root, stability
// of the full system, occupations and entanglement entropies.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfent/flow/fixed_points.hpp"
#include "mfent/gstate.hpp"

namespace mfent::flow {

struct SweepOptions {
  FixedPointOptions fixed_point{};
  double kick = 1e-3;             // relative size of the perturbation off an unstable root
  double discovery_time = 500.0;  // mean-field relaxation after a kick
  double same_root_tol = 1e-6;    // mean-field distance at which two roots are one
  int threads = 1;
};

struct BranchRow {
  double param = 0.0;
  int branch = 0;
  Stability stability = Stability::Unstable;
  double leading_eigenvalue = 0.0;
  std::vector<double> occupations;  // |alpha_i|^2
  double entropy_spatial = std::numeric_limits<double>::quiet_NaN();   // S_E(a_1, a_2)
  double entropy_momentum = std::numeric_limits<double>::quiet_NaN();  // S_E(a_+, a_-)
  bool symmetric = false;  // all |alpha_i| equal
  bool covariances_found = false;
  GaussianMoments moments;
};

struct CriticalPoint {
  double param = 0.0;
  int branch = 0;
  double lower = 0.0, upper = 0.0;  // grid interval containing it
};

struct SweepResult {
  std::string param;
  std::vector<double> grid;
  std::vector<BranchRow> rows;  // ordered by grid point, then branch id
  std::vector<CriticalPoint> critical;
  std::vector<std::string> warnings;

  std::vector<const BranchRow*> at(std::size_t grid_index) const {
    std::vector<const BranchRow*> r;
    for (const auto& row : rows)
      if (row.param == grid[grid_index]) r.push_back(&row);
    return r;
  }
};

namespace detail {

inline double mean_field_leading(const KerrModel& m, const VectorXd& x, VectorXd* unstable_direction = nullptr) {
  const MatrixXd jac = fd_jacobian(kerr_mean_field_field(m), x);
  Eigen::EigenSolver<MatrixXd> es(jac);
  Eigen::Index best = 0;
  es.eigenvalues().real().maxCoeff(&best);
  if (unstable_direction) {
    VectorXd d = es.eigenvectors().col(best).real();
    if (d.norm() < 1e-8) d = es.eigenvectors().col(best).imag();
    *unstable_direction = d.normalized();
  }
  return es.eigenvalues()(best).real();
}

inline VectorXd relax_mean_field(const KerrModel& m, VectorXd x, double t_max, const ode::Options& opts) {
  return relax(kerr_mean_field_field(m), std::move(x), t_max, 1e-11, opts);
}

struct Track {
  int id;
  VectorXd x;
  bool alive = true;
};

}  // namespace detail

inline double second_difference_argmax(const std::vector<double>& params, const std::vector<double>& values,
                                       double* max_value = nullptr) {
  double best = -1.0, where = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 1; k + 1 < values.size(); ++k) {
    const double d = std::abs(values[k + 1] - 2 * values[k] + values[k - 1]);
    if (d > best) {
      best = d;
      where = params[k];
    }
  }
  if (max_value) *max_value = best;
  return where;
}

inline SweepResult sweep_bifurcation(KerrModel model, const UnravelingScheme& scheme, const std::string& param,
                                     const std::vector<double>& grid, const SweepOptions& opts = {}) {
  if (grid.empty()) throw Error("sweep grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw Error("sweep grid must be strictly increasing");
  model.set(param, grid.front());  // rejects unknown names before any work
  model.validate();

  SweepResult res;
  res.param = param;
  res.grid = grid;
  const auto& fpo = opts.fixed_point;

  // Pass 1: mean-field branches.
  std::vector<detail::Track> tracks;
  std::vector<std::vector<std::pair<int, VectorXd>>> roots(grid.size());
  int next_id = 0;
  auto known = [&](const std::vector<std::pair<int, VectorXd>>& list, const VectorXd& x) {
    for (const auto& [id, y] : list)
      if ((x - y).lpNorm<Eigen::Infinity>() < opts.same_root_tol * (1.0 + y.lpNorm<Eigen::Infinity>())) return id;
    return -1;
  };

  for (std::size_t k = 0; k < grid.size(); ++k) {
    model.set(param, grid[k]);
    const VectorField f = kerr_mean_field_field(model);
    auto& here = roots[k];
    for (auto& tr : tracks) {
      if (!tr.alive) continue;
      const NewtonResult r = newton(f, tr.x, fpo.newton);
      if (!r.converged) {
        tr.alive = false;
        res.warnings.push_back("branch " + std::to_string(tr.id) + " lost after " + param + " = " +
                               std::to_string(grid[k - 1]) + " (fold or loss of convergence)");
        continue;
      }
      const int dup = known(here, r.x);
      if (dup >= 0) {
        tr.alive = false;
        res.warnings.push_back("branch " + std::to_string(tr.id) + " merges into branch " + std::to_string(dup) +
                               " at " + param + " = " + std::to_string(grid[k]));
        continue;
      }
      tr.x = r.x;
      here.emplace_back(tr.id, r.x);
    }
    auto add_root = [&](const VectorXd& seed) {
      const NewtonResult r = newton(f, seed, fpo.newton);
      if (!r.converged || known(here, r.x) >= 0) return;
      tracks.push_back({next_id, r.x});
      here.emplace_back(next_id++, r.x);
    };
    if (here.empty()) {
      // Start from the attractor reached from the empty cavities, and the plain Newton root.
      add_root(detail::relax_mean_field(model, VectorXd::Zero(2 * model.modes()), opts.discovery_time, fpo.ode));
      add_root(VectorXd::Zero(2 * model.modes()));
    }
    // Kick unstable roots to find the attractors they feed.
    for (std::size_t i = 0; i < here.size(); ++i) {
      VectorXd dir;
      const VectorXd x = here[i].second;
      const double rate = detail::mean_field_leading(model, x, &dir);
      if (rate <= 0.0) continue;
      // Close to a bifurcation the kick grows slowly; wait long enough for it to leave.
      const double horizon = std::min(std::max(opts.discovery_time, 30.0 / rate), 1e6);
      const double scale = opts.kick * std::max(1.0, x.norm());
      for (double sign : {1.0, -1.0})
        add_root(detail::relax_mean_field(model, x + sign * scale * dir, horizon, fpo.ode));
    }
    std::sort(here.begin(), here.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (here.empty()) res.warnings.push_back("no fixed point found at " + param + " = " + std::to_string(grid[k]));
  }

  // Pass 2: covariances, stability and entropies.
  struct Job {
    std::size_t k;
    int id;
    VectorXd x;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < grid.size(); ++k)
    for (const auto& [id, x] : roots[k]) jobs.push_back({k, id, x});
  std::vector<BranchRow> rows(jobs.size());
  std::vector<std::string> job_warnings(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      const Job& job = jobs[j];
      KerrModel m = model;
      m.set(param, grid[job.k]);
      BranchRow& row = rows[j];
      row.param = grid[job.k];
      row.branch = job.id;
      const VectorXcd alpha = unpack_alpha(job.x);
      for (Eigen::Index i = 0; i < alpha.size(); ++i) row.occupations.push_back(std::norm(alpha(i)));
      row.symmetric = alpha.cwiseAbs().maxCoeff() - alpha.cwiseAbs().minCoeff() < 1e-6;
      GaussianMoments seed(m.modes());
      seed.alpha = alpha;
      std::string why;
      const auto p = kerr_fixed_point(m, scheme, seed, fpo, &why);
      if (!p) {
        row.leading_eigenvalue = detail::mean_field_leading(m, job.x);
        row.stability = row.leading_eigenvalue < 0 ? Stability::Stable : Stability::Unstable;
        row.moments = seed;
        job_warnings[j] = "no covariance fixed point for branch " + std::to_string(job.id) + " at " + param + " = " +
                          std::to_string(row.param) + ": " + why;
        continue;
      }
      row.covariances_found = true;
      row.moments = p->moments;
      row.leading_eigenvalue = p->leading_eigenvalue;
      row.stability = p->stability;
      if (m.modes() >= 2) {
        try {
          row.entropy_spatial = entanglement_entropy(p->moments, Partition{{0}});
          if (m.modes() == 2)
            row.entropy_momentum =
                entanglement_entropy(mode_transform(p->moments, balanced_beamsplitter()), Partition{{0}});
        } catch (const Error& e) {
          job_warnings[j] = std::string("entropy unavailable: ") + e.what();
        }
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(opts.threads, static_cast<int>(jobs.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  res.rows = std::move(rows);
  for (auto& w : job_warnings)
    if (!w.empty()) res.warnings.push_back(std::move(w));

  // Stability changes along each branch, refined by bisection on the mean-field spectrum.
  for (std::size_t j = 1; j < res.rows.size(); ++j) {
    const BranchRow& b = res.rows[j];
    const BranchRow* a = nullptr;
    for (std::size_t i = j; i-- > 0;)
      if (res.rows[i].branch == b.branch) {
        a = &res.rows[i];
        break;
      }
    if (!a || a->stability == b.stability) continue;
    // Only consecutive grid points.
    const auto ka = std::find(grid.begin(), grid.end(), a->param) - grid.begin();
    const auto kb = std::find(grid.begin(), grid.end(), b.param) - grid.begin();
    if (kb != ka + 1) continue;
    CriticalPoint c{0.5 * (a->param + b.param), b.branch, a->param, b.param};
    KerrModel m = model;
    double lo = a->param, hi = b.param;
    m.set(param, lo);
    const double s_lo = detail::mean_field_leading(m, pack_alpha(a->moments.alpha));
    m.set(param, hi);
    const double s_hi = detail::mean_field_leading(m, pack_alpha(b.moments.alpha));
    if ((s_lo < 0) != (s_hi < 0)) {
      VectorXd x = pack_alpha(a->moments.alpha);
      bool ok = true;
      for (int it = 0; it < 60 && hi - lo > 1e-12 * (1.0 + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        m.set(param, mid);
        const NewtonResult r = newton(kerr_mean_field_field(m), x, fpo.newton);
        if (!r.converged) {
          ok = false;
          break;
        }
        x = r.x;
        if ((detail::mean_field_leading(m, x) < 0) == (s_lo < 0)) lo = mid;
        else hi = mid;
      }
      if (ok) c.param = 0.5 * (lo + hi);
    }
    res.critical.push_back(c);
  }
  return res;
}

/// Per grid point, the stable row used for "stable branch" series: symmetric first, then lowest id.
inline std::vector<const BranchRow*> stable_series(const SweepResult& r) {
  std::vector<const BranchRow*> out(r.grid.size(), nullptr);
  for (std::size_t k = 0; k < r.grid.size(); ++k) {
    for (const BranchRow* row : r.at(k)) {
      if (row->stability != Stability::Stable) continue;
      if (!out[k] || (row->symmetric && !out[k]->symmetric)) out[k] = row;
    }
  }
  return out;
}

}  // namespace mfent::flow
