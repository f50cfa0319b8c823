#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfent/harness/commands.hpp"

namespace {

constexpr int kConfigFailure = 2;
constexpr int kRuntimeFailure = 3;

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw mfent::harness::ConfigError(origin + ": seed '" + text + "' is not a nonnegative integer");
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mfent::harness;
  CLI::App app{"Mean-field entanglement dynamics of monitored bosonic and collective-spin systems"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir = ".";
  std::optional<std::string> seed_flag;
  std::optional<int> threads_flag;
  app.add_option("--config", config_path, "scenario file (JSON, flat keys)")->required();
  app.add_option("--seed", seed_flag, "master seed (overrides MG_SEED and the config)");
  app.add_option("--out", out_dir, "output directory for the CSV files");
  app.add_option("--threads", threads_flag, "worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();
  for (const char* name : {"flow", "steady", "sweep", "exact", "bench"}) app.add_subcommand(name);
  app.get_subcommand("flow")->description("deterministic mean-field + covariance time series");
  app.get_subcommand("steady")->description("stationary states and their stability");
  app.get_subcommand("sweep")->description("branch table over a parameter grid, with critical points");
  app.get_subcommand("exact")->description("finite-size trajectory ensemble");
  app.get_subcommand("bench")->description("ensembles for several sizes against the deterministic flow");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigFailure;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const Config cfg = Config::load(config_path);
    RunContext ctx;
    if (seed_flag) ctx.seed = parse_seed(*seed_flag, "--seed");
    else if (const char* env = std::getenv("MG_SEED"); env && *env) ctx.seed = parse_seed(env, "MG_SEED");
    else ctx.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
    ctx.threads = threads_flag ? *threads_flag : static_cast<int>(cfg.integer("threads", 1));
    if (ctx.threads < 1) throw ConfigError(cfg.origin() + ": threads must be at least 1");

    const Report rep = run_command(command, cfg, ctx);
    write_outputs(rep, out_dir);
    for (const auto& t : rep.tables) std::cout << "wrote " << (std::filesystem::path(out_dir) / (t.name + ".csv")).string() << '\n';
    for (const auto& n : rep.notes) std::cout << n << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
