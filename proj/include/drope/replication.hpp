#pragma once

// Seeded replication harness: bias^2 / variance / MSE of each estimator over
// a grid of (n, T, alpha, beta), plus the fixed-schema CSV writer.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "drope/analysis.hpp"
#include "drope/estimators.hpp"
#include "drope/io.hpp"
#include "drope/learners.hpp"
#include "drope/simulate.hpp"

namespace drope {

/// Sum by recursive halving; error grows with log(n) rather than n.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

/// Good (near-exact) and rough estimates of V and rho; the harness mixes them
/// as alpha * rough + (1 - alpha) * good.
struct ReplicationInputs {
  StateFunction v_good;
  StateFunction v_rough;
  StateFunction rho_good;
  StateFunction rho_rough;
};

struct ReplicationConfig {
  std::vector<EstimatorId> estimators{EstimatorId::val, EstimatorId::sis, EstimatorId::dr};
  std::vector<int> ns{40, 160, 640};
  std::vector<int> horizons{200};
  std::vector<double> alphas{1.0};
  std::vector<double> betas{1.0};
  int runs = 200;
  std::uint64_t seed = 0;
  Normalization mode = Normalization::self_normalized;
  /// initial-state sample size; 0 uses n
  int n0 = 0;
  /// when positive, n = total_samples / T for each horizon instead of the n x T grid
  long total_samples = 0;
  /// exact expectations instead of sampled batches
  bool population = false;
  /// worker threads; 0 uses the hardware concurrency
  int threads = 0;
};

struct ReplicationReport {
  EstimatorId id = EstimatorId::dr;
  int n = 0;
  int horizon = 0;
  double gamma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int runs = 0;
  double truth = 0.0;
  std::vector<double> estimates;
  double mean = 0.0;
  double bias_sq = 0.0;
  /// sample variance with K - 1 denominator (0 when K = 1)
  double variance = 0.0;
  double mse = 0.0;
  /// standard error of the MSE across runs
  double mse_se = 0.0;
  int errored_runs = 0;
  /// more than 1% of runs raised an error
  bool failed = false;
  std::uint64_t seed = 0;
};

/// Aggregates of `estimates` against `truth`.
inline void summarize(ReplicationReport& r) {
  const auto k = static_cast<double>(r.estimates.size());
  if (r.estimates.empty()) {
    r.mean = r.bias_sq = r.variance = r.mse = r.mse_se = std::nan("");
    return;
  }
  r.mean = pairwise_sum(r.estimates) / k;
  std::vector<double> dev(r.estimates.size()), sq(r.estimates.size());
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    dev[i] = (r.estimates[i] - r.mean) * (r.estimates[i] - r.mean);
    sq[i] = (r.estimates[i] - r.truth) * (r.estimates[i] - r.truth);
  }
  r.bias_sq = (r.mean - r.truth) * (r.mean - r.truth);
  r.variance = r.estimates.size() > 1 ? pairwise_sum(dev) / (k - 1.0) : 0.0;
  r.mse = pairwise_sum(sq) / k;
  if (r.estimates.size() > 1) {
    for (double& x : sq) x = (x - r.mse) * (x - r.mse);
    r.mse_se = std::sqrt(pairwise_sum(sq) / (k - 1.0) / k);
  } else {
    r.mse_se = 0.0;
  }
}

namespace detail {

/// Seed of the (n, T) cell; alpha/beta sweeps share their data.
inline std::uint64_t cell_seed(std::uint64_t master, int n, int horizon) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(horizon));
}

struct MixedInputs {
  double alpha;
  double beta;
  StateFunction v;
  StateFunction w;
};

inline std::vector<MixedInputs> mix_inputs(const ReplicationInputs& in, const ReplicationConfig& cfg,
                                           const PopulationContext& ctx) {
  std::vector<MixedInputs> out;
  for (double a : cfg.alphas) {
    for (double b : cfg.betas) {
      StateFunction v = mix_value(in.v_good, in.v_rough, a);
      StateFunction rho = mix_density(in.rho_good, in.rho_rough, b);
      out.push_back({a, b, std::move(v), density_ratio(rho.values, ctx.d_pi0)});
    }
  }
  return out;
}

inline bool needs_discount(EstimatorId id) {
  return id == EstimatorId::val || id == EstimatorId::sis || id == EstimatorId::dr || id == EstimatorId::conn;
}

inline void check_replication_config(const ReplicationConfig& cfg, const PopulationContext& ctx) {
  auto fail = [](const std::string& what) { throw config_error(what); };
  if (cfg.estimators.empty() || cfg.ns.empty() || cfg.horizons.empty() || cfg.alphas.empty() || cfg.betas.empty()) {
    fail("grid lists must be nonempty");
  }
  if (cfg.runs < 1) fail("K must be at least 1");
  for (int n : cfg.ns) if (n < 1) fail("n must be positive");
  for (int t : cfg.horizons) if (t < 1) fail("T must be positive");
  for (double a : cfg.alphas) if (!(a >= 0.0 && a <= 1.0)) fail("alpha must lie in [0,1]");
  for (double b : cfg.betas) if (!(b >= 0.0 && b <= 1.0)) fail("beta must lie in [0,1]");
  if (cfg.total_samples > 0) {
    for (int t : cfg.horizons) {
      if (cfg.total_samples % t != 0) fail("total_samples must be a multiple of every T");
    }
  }
  for (EstimatorId id : cfg.estimators) {
    if (id == EstimatorId::conn) fail("CONN is not a reward estimator");
    if (ctx.disc.is_average() && needs_discount(id)) {
      fail(std::string(estimator_name(id)) + " requires a discount factor below 1");
    }
    if (!ctx.disc.is_average() && id == EstimatorId::dr_average) fail("DR_AVG requires the average-reward setting");
    if (cfg.population && !(id == EstimatorId::val || id == EstimatorId::sis || id == EstimatorId::dr ||
                            id == EstimatorId::dr_average)) {
      fail(std::string(estimator_name(id)) + " has no population form");
    }
  }
}

struct RunData {
  TrajectoryBatch batch;
  InitialSample initial;
  std::optional<TrajectoryBatch> on_policy;
};

inline double evaluate_one(EstimatorId id, const MixedInputs& in, const RunData& data, const PopulationContext& ctx,
                           Normalization mode) {
  switch (id) {
    case EstimatorId::val:
      return estimate_val(in.v, data.initial, ctx.disc).value;
    case EstimatorId::sis:
      return estimate_sis(in.w, data.batch, ctx.target, ctx.behavior, ctx.disc, mode).value;
    case EstimatorId::dr:
      return estimate_dr(in.v, in.w, data.batch, data.initial, ctx.target, ctx.behavior, ctx.disc, mode).value;
    case EstimatorId::dr_average:
      return estimate_dr_average(in.v, in.w, data.batch, ctx.target, ctx.behavior).value;
    case EstimatorId::onpolicy_mc:
      return estimate_onpolicy_mc(*data.on_policy, ctx.disc).value;
    case EstimatorId::naive_average:
      return estimate_naive_average(data.batch, ctx.disc).value;
    case EstimatorId::trajectory_is:
      return estimate_trajectory_is(data.batch, ctx.target, ctx.behavior, ctx.disc,
                                    mode == Normalization::self_normalized)
          .value;
    case EstimatorId::conn:
      break;
  }
  throw config_error("unsupported estimator");
}

inline double evaluate_population(EstimatorId id, const MixedInputs& in, const PopulationContext& ctx) {
  switch (id) {
    case EstimatorId::val:
      return population_val(in.v.values, ctx);
    case EstimatorId::sis:
      return population_sis(in.w.values, ctx);
    case EstimatorId::dr:
      return population_dr(in.v.values, in.w.values, ctx);
    case EstimatorId::dr_average:
      return population_dr_average(in.v.values, in.w.values, ctx);
    default:
      break;
  }
  throw config_error(std::string(estimator_name(id)) + " has no population form");
}

}  // namespace detail

/**
 * For every (n, T) cell and run k, draws a behavior batch, an independent
 * initial sample and (if MC is requested) an on-policy batch from
 * derive_seed(cell_seed, k), evaluates every (alpha, beta, estimator), and
 * aggregates against the oracle reward. Runs execute on a thread pool; the
 * result is independent of scheduling. Reports come back in canonical order:
 * estimator, n, T, alpha, beta.
 */
inline std::vector<ReplicationReport> run_replications(const PopulationContext& ctx, const ReplicationInputs& inputs,
                                                       const ReplicationConfig& cfg) {
  detail::check_replication_config(cfg, ctx);
  const std::vector<detail::MixedInputs> mixed = detail::mix_inputs(inputs, cfg, ctx);
  std::vector<std::pair<int, int>> cells;
  if (cfg.total_samples > 0) {
    for (int t : cfg.horizons) cells.emplace_back(static_cast<int>(cfg.total_samples / t), t);
  } else {
    for (int n : cfg.ns) {
      for (int t : cfg.horizons) cells.emplace_back(n, t);
    }
  }
  const bool want_mc = std::find(cfg.estimators.begin(), cfg.estimators.end(), EstimatorId::onpolicy_mc) !=
                       cfg.estimators.end();
  const int runs = cfg.population ? 1 : cfg.runs;
  const std::size_t per_run = mixed.size() * cfg.estimators.size();
  // results[(cell * runs + k) * per_run + j]
  std::vector<std::optional<double>> results(cells.size() * runs * per_run);

  const TransitionSampler behavior_sampler(ctx.mdp, ctx.behavior);
  std::optional<TransitionSampler> target_sampler;
  if (want_mc) target_sampler.emplace(ctx.mdp, ctx.target);

  auto task = [&](std::size_t index) {
    const std::size_t c = index / runs;
    const int k = static_cast<int>(index % runs);
    const auto [n, horizon] = cells[c];
    std::optional<detail::RunData> data;
    if (!cfg.population) {
      const std::uint64_t run_seed = derive_seed(detail::cell_seed(cfg.seed, n, horizon), static_cast<std::uint64_t>(k));
      data.emplace();
      data->batch = sample_trajectories(behavior_sampler, n, horizon, derive_seed(run_seed, 0));
      data->initial = sample_initial(ctx.mdp, cfg.n0 > 0 ? cfg.n0 : n, derive_seed(run_seed, 1));
      if (want_mc) data->on_policy = sample_trajectories(*target_sampler, n, horizon, derive_seed(run_seed, 2));
    }
    std::size_t j = index * per_run;
    for (const auto& in : mixed) {
      for (EstimatorId id : cfg.estimators) {
        try {
          results[j] = cfg.population ? detail::evaluate_population(id, in, ctx)
                                      : detail::evaluate_one(id, in, *data, ctx, cfg.mode);
        } catch (const std::exception&) {
          results[j].reset();
        }
        ++j;
      }
    }
  };

  const std::size_t total = cells.size() * runs;
  const int threads = std::max(1, cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < total && !failed; i = next++) {
      try {
        task(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads == 1 || total == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min<std::size_t>(threads, total); ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ReplicationReport> reports;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t m = 0; m < mixed.size(); ++m) {
      for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        ReplicationReport r;
        r.id = cfg.estimators[e];
        r.n = cells[c].first;
        r.horizon = cells[c].second;
        r.gamma = ctx.disc.gamma();
        r.alpha = mixed[m].alpha;
        r.beta = mixed[m].beta;
        r.runs = runs;
        r.truth = ctx.reward;
        r.seed = cfg.seed;
        for (int k = 0; k < runs; ++k) {
          const auto& x = results[((c * runs) + k) * per_run + m * cfg.estimators.size() + e];
          if (x && std::isfinite(*x)) {
            r.estimates.push_back(*x);
          } else {
            ++r.errored_runs;
          }
        }
        r.failed = r.errored_runs * 100 > runs;
        summarize(r);
        reports.push_back(std::move(r));
      }
    }
  }
  std::stable_sort(reports.begin(), reports.end(), [](const ReplicationReport& a, const ReplicationReport& b) {
    return std::tuple(static_cast<int>(a.id), a.n, a.horizon, a.alpha, a.beta) <
           std::tuple(static_cast<int>(b.id), b.n, b.horizon, b.alpha, b.beta);
  });
  return reports;
}

inline constexpr const char* kCsvHeader = "estimator,n,T,gamma,alpha,beta,K,truth,bias_sq,variance,mse,errored_runs,seed";

inline void write_csv(std::ostream& out, const std::vector<ReplicationReport>& reports) {
  using detail::format_real;
  out << kCsvHeader << '\n';
  for (const auto& r : reports) {
    out << estimator_name(r.id) << ',' << r.n << ',' << r.horizon << ',' << format_real(r.gamma) << ','
        << format_real(r.alpha) << ',' << format_real(r.beta) << ',' << r.runs << ',' << format_real(r.truth) << ','
        << format_real(r.bias_sq) << ',' << format_real(r.variance) << ',' << format_real(r.mse) << ','
        << r.errored_runs << ',' << r.seed << '\n';
  }
}

}  // namespace drope
