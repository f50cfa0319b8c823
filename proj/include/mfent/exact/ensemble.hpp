#pragma once

// Ensembles of independent trajectories. Trajectory k draws from
// CounterRng(seed, k), values are stored per trajectory and reduced in index
// order, so the statistics are bit-identical for any thread count.

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "mfent/core.hpp"
#include "mfent/exact/trajectory.hpp"
#include "mfent/rng.hpp"
#include "mfent/unravel.hpp"

namespace mfent::exact {

struct Observable {
  std::string name;
  std::function<double(const VectorXcd&)> eval;
};

struct EnsembleConfig {
  UnravelingScheme scheme{Unraveling::QuantumJump};
  TrajectoryOptions trajectory{};
  int trajectories = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  double max_failure_fraction = 0.01;
  bool keep_values = false;  // retain per-trajectory values in EnsembleStats::values
};

struct EnsembleStats {
  std::vector<double> times;
  std::vector<std::string> names;
  MatrixXd mean;  // observable x time
  MatrixXd stddev;  // sample standard deviation over trajectories
  int trajectories = 0;  // successful ones
  std::uint64_t seed = 0;
  std::vector<std::string> failures;
  double mean_jumps = 0.0;  // jumps per trajectory up to the final time
  // With keep_values: per trajectory, observable-major (o * times + i); empty for failed ones.
  std::vector<std::vector<double>> values;

  int index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw Error("no observable named '" + name + "'");
  }
  double standard_error(int obs, int t) const { return trajectories > 0 ? stddev(obs, t) / std::sqrt(trajectories) : 0.0; }
};

inline EnsembleStats ensemble_run(const ExactModel& model, const VectorXcd& psi0, const std::vector<Observable>& obs,
                                  const EnsembleConfig& cfg) {
  if (cfg.trajectories < 1) throw Error("ensemble needs at least one trajectory");
  if (cfg.threads < 1) throw Error("thread count must be positive");
  const std::size_t n_t = detail::output_times(cfg.trajectory.t_max, cfg.trajectory.dt_out).size();
  const std::size_t n_o = obs.size();
  const int n_traj = cfg.trajectories;

  std::vector<std::vector<double>> values(n_traj);
  std::vector<std::string> error(n_traj);
  std::vector<std::int64_t> jumps(n_traj, 0);

  const auto run_one = [&](int k) {
    std::vector<double> v(n_o * n_t, 0.0);
    try {
      const auto rec = evolve(cfg.scheme, model, psi0, cfg.trajectory, CounterRng(cfg.seed, static_cast<std::uint64_t>(k)),
                              [&](int i, double, const VectorXcd& psi) {
                                for (std::size_t o = 0; o < n_o; ++o) v[o * n_t + i] = obs[o].eval(psi);
                              });
      jumps[k] = rec.jumps.empty() ? 0 : rec.jumps.back();
      values[k] = std::move(v);
    } catch (const Error& e) {
      error[k] = e.what();
    }
  };

  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int k = next++; k < n_traj; k = next++) run_one(k);
  };
  const int nthreads = std::min(cfg.threads, n_traj);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  }

  EnsembleStats out;
  out.times = detail::output_times(cfg.trajectory.t_max, cfg.trajectory.dt_out);
  out.seed = cfg.seed;
  for (const auto& o : obs) out.names.push_back(o.name);
  for (int k = 0; k < n_traj; ++k)
    if (!error[k].empty()) out.failures.push_back("trajectory " + std::to_string(k) + ": " + error[k]);
  if (out.failures.size() > cfg.max_failure_fraction * n_traj)
    throw Error(std::to_string(out.failures.size()) + " of " + std::to_string(n_traj) +
                " trajectories failed; first: " + out.failures.front());

  out.mean = MatrixXd::Zero(n_o, n_t);
  out.stddev = MatrixXd::Zero(n_o, n_t);
  double jump_sum = 0.0;
  for (int k = 0; k < n_traj; ++k) {
    if (!error[k].empty()) continue;
    ++out.trajectories;
    jump_sum += static_cast<double>(jumps[k]);
    for (std::size_t o = 0; o < n_o; ++o)
      for (std::size_t i = 0; i < n_t; ++i) out.mean(o, i) += values[k][o * n_t + i];
  }
  out.mean /= out.trajectories;
  out.mean_jumps = jump_sum / out.trajectories;
  if (out.trajectories > 1) {
    for (int k = 0; k < n_traj; ++k) {
      if (!error[k].empty()) continue;
      for (std::size_t o = 0; o < n_o; ++o)
        for (std::size_t i = 0; i < n_t; ++i) out.stddev(o, i) += std::pow(values[k][o * n_t + i] - out.mean(o, i), 2);
    }
    out.stddev = (out.stddev / (out.trajectories - 1)).cwiseSqrt();
  }
  if (cfg.keep_values) out.values = std::move(values);
  return out;
}

}  // namespace mfent::exact
