// drope: environment generation, input training, estimator grids and
// identity verification.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "drope/drope.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool population = false;
  bool average = false;
  bool print_config = false;
};

drope::ExperimentConfig load_config(const GlobalOptions& g) {
  drope::ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw drope::config_error("cannot read " + g.config_path);
    cfg = drope::parse_config(in);
  }
  for (const auto& item : g.overrides) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw drope::config_error("--set expects section.key=value, got '" + item + "'");
    }
    cfg.set(item.substr(0, dot), item.substr(dot + 1, eq - dot - 1), item.substr(eq + 1));
  }
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.out.empty()) cfg.out = g.out;
  if (g.population) cfg.population = true;
  if (g.average) {
    cfg.average = true;
    if (std::find(cfg.estimators.begin(), cfg.estimators.end(), drope::EstimatorId::dr_average) ==
        cfg.estimators.end()) {
      cfg.estimators = {drope::EstimatorId::dr_average};
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doubly robust off-policy evaluation experiments"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value config file with [section] headers");
  app.add_option("--set", g.overrides, "override one key, e.g. --set evaluate.K=50");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output path (file for make-env, directory otherwise)");
  app.add_flag("--population", g.population, "exact expectations instead of sampled batches");
  app.add_flag("--average", g.average, "average-reward (gamma = 1) estimators");
  app.add_flag("--print-config", g.print_config, "print the effective configuration and exit");

  std::string env_name = "gridworld";
  int env_size = 8;
  double env_gamma = 0.99;
  auto* make_env = app.add_subcommand("make-env", "write a builtin MDP to a file");
  make_env->add_option("--name", env_name, "gridworld, two_state or taxi_mini")->capture_default_str();
  make_env->add_option("--size", env_size, "grid size")->capture_default_str();
  make_env->add_option("--gamma", env_gamma, "discount stored in the header")->capture_default_str();

  auto* train = app.add_subcommand("train", "fit rough and good inputs and write them as state functions");

  std::string inputs;
  auto* evaluate = app.add_subcommand("evaluate", "run the replication grid and write report.csv");
  evaluate->add_option("--inputs", inputs, "directory written by train");

  bool inject_fault = false;
  std::size_t seed_count = drope::kIdentitySeeds.size();
  auto* verify = app.add_subcommand("verify", "run the identity checks and print the residual table");
  verify->add_flag("--inject-fault", inject_fault, "negate the ratio error in the bias identity");
  verify->add_option("--seeds", seed_count, "number of checked-in seeds to use")
      ->check(CLI::Range(std::size_t{1}, drope::kIdentitySeeds.size()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? drope::kExitOk : drope::kExitConfigError;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    drope::ExperimentConfig cfg = load_config(g);
    if (!inputs.empty()) cfg.inputs = inputs;
    if (g.print_config) {
      cfg.print(std::cout);
      return drope::kExitOk;
    }
    if (make_env->parsed()) {
      const std::string path = g.out.empty() ? env_name + ".mdp" : g.out;
      drope::cmd_make_env(env_name, env_size, env_gamma, path);
      std::cout << "wrote " << path << '\n';
      return drope::kExitOk;
    }
    if (train->parsed()) return drope::cmd_train(cfg, std::cout);
    if (evaluate->parsed()) return drope::cmd_evaluate(cfg, std::cout);
    if (verify->parsed()) {
      const std::span<const std::uint32_t> seeds(drope::kIdentitySeeds.data(), seed_count);
      return drope::cmd_verify(seeds, drope::VerifyOptions{inject_fault}, std::cout);
    }
    std::cout << app.help();
    return drope::kExitConfigError;
  } catch (const drope::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return drope::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return drope::kExitVerifyFailed;
  }
}
