#pragma once

// Scenario files: one JSON object with flat keys. Every key must be known to the
// schema below; values are type-checked on load. All rates are in units of kappa.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfent/core.hpp"
#include "mfent/flow/kerr.hpp"
#include "mfent/flow/spin.hpp"
#include "mfent/unravel.hpp"

namespace mfent::harness {

// Malformed or inconsistent scenario; the CLI maps it to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

enum class KeyType { Number, Integer, String, NumberList, Bool };

struct KeySpec {
  const char* name;
  KeyType type;
  const char* help;
};

inline const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys{
      {"model", KeyType::String, "single_kerr | dimer | spin"},
      {"kappa", KeyType::Number, "loss rate (the unit of all rates)"},
      {"delta", KeyType::Number, "detuning Delta (Kerr models)"},
      {"U", KeyType::Number, "Kerr nonlinearity U~ (Kerr models)"},
      {"F", KeyType::Number, "drive F~ (dimer: F_1 = -F_2 = F)"},
      {"J", KeyType::Number, "hopping J (dimer)"},
      {"omega", KeyType::Number, "Rabi drive Omega (spin)"},
      {"scheme", KeyType::String, "quantum_jump | homodyne | heterodyne"},
      {"schemes", KeyType::String, "comma-separated list of schemes (bench, sweep)"},
      {"qj_zero_policy", KeyType::String, "error | heterodyne_fallback"},
      {"init_alpha_re", KeyType::NumberList, "initial Re alpha~ per mode"},
      {"init_alpha_im", KeyType::NumberList, "initial Im alpha~ per mode"},
      {"init_theta", KeyType::Number, "initial polar angle (spin)"},
      {"init_phi", KeyType::Number, "initial azimuth (spin)"},
      {"t_max", KeyType::Number, "final time"},
      {"dt_out", KeyType::Number, "output spacing"},
      {"rtol", KeyType::Number, "ODE relative tolerance"},
      {"atol", KeyType::Number, "ODE absolute tolerance"},
      {"dt", KeyType::Number, "fixed step of diffusive trajectories"},
      {"norm_drift_tol", KeyType::Number, "largest per-step norm drift of diffusive trajectories"},
      {"sweep_param", KeyType::String, "swept parameter (F, J, U, Delta, omega)"},
      {"sweep_min", KeyType::Number, "first grid value"},
      {"sweep_max", KeyType::Number, "last grid value"},
      {"sweep_step", KeyType::Number, "grid spacing"},
      {"sweep_grid", KeyType::NumberList, "explicit grid (instead of min/max/step)"},
      {"average_from", KeyType::Number, "start of the long-time average (spin sweeps above kappa)"},
      {"average_to", KeyType::Number, "end of the long-time average"},
      {"n_traj", KeyType::Integer, "trajectories per ensemble"},
      {"sizes", KeyType::NumberList, "system sizes: N for Kerr models, S for the spin"},
      {"cutoff", KeyType::Integer, "Fock cutoff (default from the mean-field occupation)"},
      {"jump_timing", KeyType::String, "waiting_time | fixed_step"},
      {"seed", KeyType::Integer, "master seed"},
      {"threads", KeyType::Integer, "worker threads"},
      {"per_trajectory", KeyType::Bool, "also write every trajectory (large)"},
      {"description", KeyType::String, "free text"},
  };
  return keys;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : schema())
    if (name == k.name) return &k;
  return nullptr;
}

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::string& origin = "config") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": top level must be an object of flat keys");
    Config c;
    c.origin_ = origin;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const KeySpec* spec = find_key(it.key());
      if (!spec) throw ConfigError(origin + ": unknown key '" + it.key() + "'");
      const auto& v = it.value();
      bool ok = false;
      switch (spec->type) {
        case KeyType::Number: ok = v.is_number(); break;
        case KeyType::Integer: ok = v.is_number_integer(); break;
        case KeyType::String: ok = v.is_string(); break;
        case KeyType::Bool: ok = v.is_boolean(); break;
        case KeyType::NumberList:
          ok = v.is_array();
          for (const auto& e : v) ok = ok && e.is_number();
          break;
      }
      if (!ok) throw ConfigError(origin + ": key '" + it.key() + "' has the wrong type (" + spec->help + ")");
    }
    c.json_ = std::move(j);
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return json_.contains(key); }

  double number(const std::string& key) const {
    require(key);
    return json_[key].get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
  std::int64_t integer(const std::string& key) const {
    require(key);
    return json_[key].get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const { return has(key) ? integer(key) : fallback; }
  std::string string(const std::string& key) const {
    require(key);
    return json_[key].get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }
  std::vector<double> list(const std::string& key) const {
    require(key);
    return json_[key].get<std::vector<double>>();
  }
  bool flag(const std::string& key, bool fallback) const { return has(key) ? json_[key].get<bool>() : fallback; }

  void require(const std::string& key) const {
    if (!has(key)) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  }

  const std::string& origin() const { return origin_; }

 private:
  nlohmann::json json_ = nlohmann::json::object();
  std::string origin_ = "config";
};

// ---- typed views -----------------------------------------------------------------------------

enum class ModelKind { SingleKerr, Dimer, Spin };

inline ModelKind model_kind(const Config& c) {
  const std::string m = c.string("model");
  if (m == "single_kerr") return ModelKind::SingleKerr;
  if (m == "dimer") return ModelKind::Dimer;
  if (m == "spin") return ModelKind::Spin;
  throw ConfigError(c.origin() + ": unknown model '" + m + "' (single_kerr | dimer | spin)");
}

inline void positive(const Config& c, const std::string& key, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(c.origin() + ": key '" + key + "' must be positive");
}

inline KerrModel kerr_model(const Config& c) {
  const ModelKind kind = model_kind(c);
  if (kind == ModelKind::Spin) throw ConfigError(c.origin() + ": expected a Kerr model");
  const double kappa = c.number("kappa");
  positive(c, "kappa", kappa);
  for (const char* bad : {"omega", "init_theta", "init_phi"})
    if (c.has(bad)) throw ConfigError(c.origin() + ": key '" + std::string(bad) + "' does not apply to Kerr models");
  if (kind == ModelKind::SingleKerr) {
    if (c.has("J")) throw ConfigError(c.origin() + ": key 'J' does not apply to a single Kerr mode");
    return KerrModel::single(c.number("delta"), c.number("U"), c.number("F"), kappa);
  }
  return KerrModel::dimer(c.number("J"), c.number("delta"), c.number("U"), c.number("F", 0.0), kappa);
}

inline SpinModel spin_model(const Config& c) {
  if (model_kind(c) != ModelKind::Spin) throw ConfigError(c.origin() + ": expected the spin model");
  for (const char* bad : {"delta", "U", "F", "J", "init_alpha_re", "init_alpha_im"})
    if (c.has(bad)) throw ConfigError(c.origin() + ": key '" + std::string(bad) + "' does not apply to the spin model");
  SpinModel m{c.number("omega"), c.number("kappa")};
  positive(c, "kappa", m.kappa);
  if (m.omega < 0.0) throw ConfigError(c.origin() + ": key 'omega' must be nonnegative");
  return m;
}

inline UnravelingScheme parse_scheme(const Config& c, const std::string& name) {
  const auto tag = parse_unraveling(name);
  if (!tag) throw ConfigError(c.origin() + ": unknown scheme '" + name + "'");
  UnravelingScheme s{*tag};
  const std::string policy = c.string("qj_zero_policy", "error");
  if (policy == "heterodyne_fallback") s.qj_zero_policy = QjZeroPolicy::HeterodyneFallback;
  else if (policy != "error") throw ConfigError(c.origin() + ": unknown qj_zero_policy '" + policy + "'");
  return s;
}

inline UnravelingScheme scheme(const Config& c) { return parse_scheme(c, c.string("scheme")); }

/// Schemes listed under `schemes` (comma separated), else the single `scheme`.
inline std::vector<UnravelingScheme> schemes(const Config& c) {
  if (!c.has("schemes")) return {scheme(c)};
  std::vector<UnravelingScheme> out;
  std::stringstream ss(c.string("schemes"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(parse_scheme(c, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(c.origin() + ": key 'schemes' lists no scheme");
  return out;
}

inline GaussianMoments kerr_initial(const Config& c, int modes) {
  GaussianMoments g(modes);
  if (!c.has("init_alpha_re") && !c.has("init_alpha_im")) return g;
  const auto re = c.has("init_alpha_re") ? c.list("init_alpha_re") : std::vector<double>(modes, 0.0);
  const auto im = c.has("init_alpha_im") ? c.list("init_alpha_im") : std::vector<double>(modes, 0.0);
  if (static_cast<int>(re.size()) != modes || static_cast<int>(im.size()) != modes)
    throw ConfigError(c.origin() + ": init_alpha_re/init_alpha_im need one entry per mode");
  for (int i = 0; i < modes; ++i) g.alpha(i) = cplx(re[i], im[i]);
  return g;
}

inline SpinFrame spin_initial(const Config& c) {
  return SpinFrame{c.number("init_theta", kPi / 2), c.number("init_phi", 0.0), {}, 0.0};
}

inline flow::FlowOptions flow_options(const Config& c) {
  flow::FlowOptions o;
  o.ode.rtol = c.number("rtol", o.ode.rtol);
  o.ode.atol = c.number("atol", o.ode.atol);
  positive(c, "rtol", o.ode.rtol);
  positive(c, "atol", o.ode.atol);
  return o;
}

inline std::vector<double> sweep_grid(const Config& c) {
  std::vector<double> g;
  if (c.has("sweep_grid")) {
    g = c.list("sweep_grid");
  } else {
    const double lo = c.number("sweep_min"), hi = c.number("sweep_max"), step = c.number("sweep_step");
    positive(c, "sweep_step", step);
    for (int k = 0; lo + k * step <= hi + 1e-9 * step; ++k) g.push_back(lo + k * step);
  }
  if (g.empty()) throw ConfigError(c.origin() + ": sweep grid is empty");
  for (std::size_t k = 1; k < g.size(); ++k)
    if (!(g[k] > g[k - 1])) throw ConfigError(c.origin() + ": sweep grid must be strictly increasing");
  return g;
}

}  // namespace mfent::harness
