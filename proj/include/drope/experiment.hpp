#pragma once

// Experiment commands: environment construction, input training, estimator
// grids and the verification table.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "drope/analysis.hpp"
#include "drope/config.hpp"
#include "drope/environments.hpp"
#include "drope/io.hpp"
#include "drope/learners.hpp"
#include "drope/minimax.hpp"
#include "drope/replication.hpp"
#include "drope/verification.hpp"

namespace drope {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;

/// Discount for policy construction and learners: gamma, or 0.99 in the
/// average-reward setting.
inline Discount working_discount(const ExperimentConfig& cfg) {
  return Discount::discounted(cfg.average ? 0.99 : cfg.gamma);
}

inline Discount evaluation_discount(const ExperimentConfig& cfg) {
  return cfg.average ? Discount::average() : Discount::discounted(cfg.gamma);
}

struct Environment {
  TabularMDP mdp;
  Policy target;
  Policy behavior;
};

/// The configured MDP with target softmax(Q*, tau) and behavior softmax(Q*, tau0).
inline Environment build_environment(const ExperimentConfig& cfg) {
  Environment env;
  if (!cfg.mdp_file.empty()) {
    auto in = open_input(cfg.mdp_file);
    env.mdp = load_mdp(in, cfg.mdp_file).mdp;
  } else {
    env.mdp = envs::builtin(cfg.env, cfg.size);
  }
  const auto problems = validate_mdp(env.mdp);
  if (!problems.empty()) throw config_error("invalid MDP: " + problems.front());
  const Matrix q = solve_optimal_q(env.mdp, working_discount(cfg));
  env.target = make_softmax_policy(q, cfg.tau);
  env.behavior = make_softmax_policy(q, cfg.tau0);
  return env;
}

// ---------------------------------------------------------------------------
// make-env
// ---------------------------------------------------------------------------

inline void cmd_make_env(const std::string& name, int size, double gamma, const std::string& out_path) {
  if (!envs::is_builtin(name)) throw config_error("unknown environment '" + name + "'");
  const TabularMDP m = envs::builtin(name, size);
  save_file(out_path, [&](std::ostream& o, const TabularMDP& x) { save_mdp(o, x, gamma); }, m);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainedInputs {
  StateFunction v_good;
  StateFunction v_rough;
  StateFunction rho_good;
  StateFunction rho_rough;
};

namespace detail {

/// Stationary distribution and centered value of the empirical chain; rows
/// of unobserved pairs become self-loops.
inline std::pair<StateFunction, StateFunction> fit_model_based_average(const TrajectoryBatch& batch,
                                                                       const InitialSample& initial,
                                                                       const Policy& target, int S, int A) {
  EmpiricalModel m = build_empirical_model(batch, initial, S, A);
  TabularMDP model = TabularMDP::zeros(S, A);
  model.reward = m.reward;
  model.initial_dist = m.initial_dist;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (m.counts(s, a) > 0.0) {
        model.transition[a].row(s) = m.transition[a].row(s);
      } else {
        model.transition[a](s, s) = 1.0;
      }
    }
  }
  Vector rho = stationary_distribution(transition_matrix(model, target));
  for (int s = 0; s < S; ++s) {
    if (!m.visited[s]) rho[s] = 0.0;
  }
  rho /= rho.sum();
  const ModelBasedFit fit = fit_model_based(batch, initial, target, Discount::discounted(0.99), S, A);
  Vector v = fit.v_hat.values;
  v.array() -= rho.dot(v);
  return {StateFunction(std::move(v), Role::value), StateFunction(std::move(rho), Role::density)};
}

inline std::pair<StateFunction, StateFunction> fit_inputs(const ExperimentConfig& cfg, const Environment& env,
                                                          int n, int horizon, std::uint64_t seed) {
  const int S = env.mdp.num_states;
  const int A = env.mdp.num_actions;
  const TrajectoryBatch batch = sample_trajectories(env.mdp, env.behavior, n, horizon, derive_seed(seed, 0));
  const InitialSample initial = sample_initial(env.mdp, n, derive_seed(seed, 1));
  if (cfg.average) return fit_model_based_average(batch, initial, env.target, S, A);
  const Discount disc = Discount::discounted(cfg.gamma);
  if (cfg.learner == "model_based") {
    ModelBasedFit fit = fit_model_based(batch, initial, env.target, disc, S, A);
    return {std::move(fit.v_hat), std::move(fit.rho_hat)};
  }
  const TransitionSet set = transition_set_from_batch(batch, initial, disc);
  MinimaxConfig mc;
  mc.batch_size = cfg.minimax_batch;
  mc.outer_steps = cfg.minimax_steps;
  mc.inner_steps = cfg.inner_steps;
  mc.step_primal = cfg.step_primal;
  mc.step_test = cfg.step_test;
  mc.seed = derive_seed(seed, 2);
  const MinimaxResult v = fit_value_minimax(set, env.target, env.behavior, disc, ParamFamily::tabular(S, 0.0),
                                            ParamFamily::tabular(S, 0.0), mc);
  const MinimaxResult w = fit_density_ratio_minimax(set, env.target, env.behavior, disc,
                                                    ParamFamily::tabular(S, 1.0), ParamFamily::tabular(S, 0.0), mc);
  // rho = w * empirical discounted visitation, normalized
  Vector rho = w.function.values.cwiseProduct(empirical_visitation(batch, disc, S));
  if (rho.sum() > 0.0) rho /= rho.sum();
  return {StateFunction(v.function.values, Role::value), StateFunction(std::move(rho), Role::density)};
}

}  // namespace detail

/**
 * Rough inputs come from `rough_n` behavior trajectories; good inputs are
 * oracle-exact when good_n = 0 and learned from `good_n` trajectories
 * otherwise. Seeds derive from the master seed only.
 */
inline TrainedInputs train_inputs(const ExperimentConfig& cfg, const Environment& env) {
  const std::uint64_t seed = derive_seed(cfg.seed, 0x7261696eu);
  TrainedInputs out;
  auto [v_rough, rho_rough] = detail::fit_inputs(cfg, env, cfg.rough_n, cfg.rough_T, derive_seed(seed, 0));
  out.v_rough = std::move(v_rough);
  out.rho_rough = std::move(rho_rough);
  if (cfg.good_n == 0) {
    const Discount disc = evaluation_discount(cfg);
    out.v_good = cfg.average ? exact_differential_value(env.mdp, env.target) : exact_value(env.mdp, env.target, disc);
    out.rho_good = exact_visitation(env.mdp, env.target, disc);
  } else {
    auto [v_good, rho_good] = detail::fit_inputs(cfg, env, cfg.good_n, cfg.good_T, derive_seed(seed, 1));
    out.v_good = std::move(v_good);
    out.rho_good = std::move(rho_good);
  }
  return out;
}

inline void save_inputs(const std::filesystem::path& dir, const TrainedInputs& in, const Vector& d_pi0) {
  std::filesystem::create_directories(dir);
  auto save = [&](const char* name, const StateFunction& f) { save_file((dir / name).string(), save_state_function, f); };
  save("v_good.txt", in.v_good);
  save("v_rough.txt", in.v_rough);
  save("rho_good.txt", in.rho_good);
  save("rho_rough.txt", in.rho_rough);
  save("w_good.txt", density_ratio(in.rho_good.values, d_pi0));
  save("w_rough.txt", density_ratio(in.rho_rough.values, d_pi0));
}

inline TrainedInputs load_inputs(const std::filesystem::path& dir, int num_states) {
  auto load = [&](const char* name) {
    const std::string path = (dir / name).string();
    auto in = open_input(path);
    StateFunction f = load_state_function(in, path);
    if (f.size() != num_states) throw config_error(path + ": state count does not match the environment");
    return f;
  };
  return {load("v_good.txt"), load("v_rough.txt"), load("rho_good.txt"), load("rho_rough.txt")};
}

inline int cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Environment env = build_environment(cfg);
  const TrainedInputs in = train_inputs(cfg, env);
  const Discount disc = evaluation_discount(cfg);
  const Vector d_pi0 = exact_visitation(env.mdp, env.behavior, disc).values;
  save_inputs(cfg.out, in, d_pi0);
  const Vector v_true =
      cfg.average ? exact_differential_value(env.mdp, env.target).values : exact_value(env.mdp, env.target, disc).values;
  const Vector d_true = exact_visitation(env.mdp, env.target, disc).values;
  log << "max-norm error  V good " << (in.v_good.values - v_true).lpNorm<Eigen::Infinity>() << "  V rough "
      << (in.v_rough.values - v_true).lpNorm<Eigen::Infinity>() << '\n'
      << "max-norm error  rho good " << (in.rho_good.values - d_true).lpNorm<Eigen::Infinity>() << "  rho rough "
      << (in.rho_rough.values - d_true).lpNorm<Eigen::Infinity>() << '\n'
      << "wrote inputs to " << cfg.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

inline ReplicationConfig replication_config(const ExperimentConfig& cfg) {
  ReplicationConfig rc;
  rc.estimators = cfg.estimators;
  rc.ns = cfg.ns;
  rc.horizons = cfg.horizons;
  rc.alphas = cfg.alphas;
  rc.betas = cfg.betas;
  rc.runs = cfg.runs;
  rc.seed = cfg.seed;
  rc.mode = cfg.normalization == "constant" ? Normalization::constant : Normalization::self_normalized;
  rc.n0 = cfg.n0;
  rc.total_samples = cfg.total_samples;
  rc.population = cfg.population;
  rc.threads = cfg.threads;
  return rc;
}

inline std::vector<ReplicationReport> evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  const Environment env = build_environment(cfg);
  const PopulationContext ctx(env.mdp, env.target, env.behavior, evaluation_discount(cfg));
  const TrainedInputs in = cfg.inputs.empty() ? train_inputs(cfg, env) : load_inputs(cfg.inputs, env.mdp.num_states);
  return run_replications(ctx, ReplicationInputs{in.v_good, in.v_rough, in.rho_good, in.rho_rough},
                          replication_config(cfg));
}

inline int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  const auto reports = evaluate(cfg);
  std::filesystem::create_directories(cfg.out);
  const std::string path = (std::filesystem::path(cfg.out) / "report.csv").string();
  save_file(path, write_csv, reports);
  log << std::left << std::setw(8) << "est" << std::setw(7) << "n" << std::setw(6) << "T" << std::setw(7) << "alpha"
      << std::setw(7) << "beta" << std::setw(14) << "bias^2" << std::setw(14) << "variance" << std::setw(14) << "mse"
      << "errors\n";
  bool failed = false;
  for (const auto& r : reports) {
    log << std::left << std::setw(8) << estimator_name(r.id) << std::setw(7) << r.n << std::setw(6) << r.horizon
        << std::setw(7) << r.alpha << std::setw(7) << r.beta << std::setw(14) << r.bias_sq << std::setw(14)
        << r.variance << std::setw(14) << r.mse << r.errored_runs << (r.failed ? "  FAILED" : "") << '\n';
    failed = failed || r.failed;
  }
  log << "wrote " << path << '\n';
  return failed ? kExitVerifyFailed : kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

inline int cmd_verify(std::span<const std::uint32_t> seeds, const VerifyOptions& opt, std::ostream& log) {
  const auto results = run_identity_checks(seeds, opt);
  bool ok = true;
  log << std::left << std::setw(38) << "check" << std::setw(8) << "cases" << std::setw(14) << "max residual"
      << std::setw(11) << "tolerance" << "result\n";
  for (const auto& r : results) {
    char residual[32];
    char tol[32];
    std::snprintf(residual, sizeof residual, "%.3e", r.max_residual);
    std::snprintf(tol, sizeof tol, "%.0e", r.tolerance);
    log << std::left << std::setw(38) << r.name << std::setw(8) << r.cases << std::setw(14) << residual
        << std::setw(11) << tol << (r.passed() ? "PASS" : "FAIL") << '\n';
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitVerifyFailed;
}

}  // namespace drope
