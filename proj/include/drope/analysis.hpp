#pragma once

// Population (infinite-sample) forms of the estimators and numerical
// verifiers for the bias, variance and duality identities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "drope/errors.hpp"
#include "drope/estimators.hpp"
#include "drope/mdp.hpp"
#include "drope/rng.hpp"
#include "drope/simulate.hpp"

namespace drope {

/// Oracle quantities for one (mdp, target, behavior, discount). In average
/// mode the visitations are stationary distributions and `v_pi` is the
/// differential value.
struct PopulationContext {
  TabularMDP mdp;
  Policy target;
  Policy behavior;
  Discount disc;
  Matrix p_target;
  Vector d_pi;
  Vector d_pi0;
  Vector v_pi;
  Vector r_pi;
  double reward = 0.0;

  PopulationContext(TabularMDP m, Policy pi, Policy pi0, Discount d)
      : mdp(std::move(m)), target(std::move(pi)), behavior(std::move(pi0)), disc(d) {
    detail::check_policy_shape(mdp, target);
    detail::check_policy_shape(mdp, behavior);
    p_target = transition_matrix(mdp, target);
    d_pi = exact_visitation(mdp, target, disc).values;
    d_pi0 = exact_visitation(mdp, behavior, disc).values;
    r_pi = policy_reward(mdp, target).values;
    v_pi = disc.is_average() ? exact_differential_value(mdp, target).values : exact_value(mdp, target, disc).values;
    reward = exact_reward(mdp, target, disc);
  }

  int num_states() const noexcept { return mdp.num_states; }
  double gamma() const noexcept { return disc.gamma(); }
  Vector true_ratio() const { return density_ratio(d_pi, d_pi0).values; }
};

namespace detail {

inline void check_context_shape(const PopulationContext& ctx, const Vector& f, const char* what) {
  if (f.size() != ctx.num_states()) throw shape_error(std::string("shape mismatch: ") + what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Population estimators
// ---------------------------------------------------------------------------

/// (1-gamma) sum mu0 v
inline double population_val(const Vector& v, const PopulationContext& ctx) {
  detail::check_context_shape(ctx, v, "value function");
  detail::require_discounted(ctx.disc, "population_val");
  return (1.0 - ctx.gamma()) * ctx.mdp.initial_dist.dot(v);
}

/// sum r^pi d_pi0 w
inline double population_sis(const Vector& w, const PopulationContext& ctx) {
  detail::check_context_shape(ctx, w, "density ratio");
  return (ctx.r_pi.array() * ctx.d_pi0.array() * w.array()).sum();
}

/// sum (v - gamma P v) d_pi0 w
inline double population_conn(const Vector& v, const Vector& w, const PopulationContext& ctx) {
  detail::check_context_shape(ctx, v, "value function");
  detail::check_context_shape(ctx, w, "density ratio");
  detail::require_discounted(ctx.disc, "population_conn");
  const Vector bridge = v - ctx.gamma() * (ctx.p_target * v);
  return (bridge.array() * ctx.d_pi0.array() * w.array()).sum();
}

inline double population_dr(const Vector& v, const Vector& w, const PopulationContext& ctx) {
  return population_sis(w, ctx) + population_val(v, ctx) - population_conn(v, w, ctx);
}

/// E_{d_pi0}[w (r^pi - v + P v)] / E_{d_pi0}[w]
inline double population_dr_average(const Vector& v, const Vector& w, const PopulationContext& ctx) {
  detail::check_context_shape(ctx, v, "value function");
  detail::check_context_shape(ctx, w, "density ratio");
  const Vector weighted = ctx.d_pi0.cwiseProduct(w);
  const double z = weighted.sum();
  if (!(z > 0.0)) throw degenerate_weights_error("degenerate importance weights: E[w] = 0");
  return weighted.dot(ctx.r_pi - v + ctx.p_target * v) / z;
}

/// Bellman residual v - r^pi - gamma P v (discounted) or r^pi - v + P v - R (average).
inline Vector bellman_residual(const Vector& v, const PopulationContext& ctx) {
  if (ctx.disc.is_average()) return ctx.r_pi - v + ctx.p_target * v - Vector::Constant(v.size(), ctx.reward);
  return v - ctx.r_pi - ctx.gamma() * (ctx.p_target * v);
}

// ---------------------------------------------------------------------------
// Bias identity
// ---------------------------------------------------------------------------

struct BiasCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct Theorem1Report {
  /// R_DR - R^pi against E_{d_pi0}[eps_w eps_v]
  BiasCheck dr;
  /// R_SIS - R^pi against -E_{d_pi0}[eps_w r^pi]
  BiasCheck sis;
  /// R_VAL - R^pi against E_{d_pi}[eps_v]
  BiasCheck val;
};

/// eps_w = d_pi/d_pi0 - w, taken as zero where d_pi0 = 0.
inline Vector ratio_error(const Vector& w, const PopulationContext& ctx) {
  Vector eps(w.size());
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    eps[s] = ctx.d_pi0[s] > 0.0 ? ctx.d_pi[s] / ctx.d_pi0[s] - w[s] : 0.0;
  }
  return eps;
}

/// `flip_ratio_error` negates eps_w on the right-hand side; used only to
/// confirm that the check can fail.
inline Theorem1Report verify_theorem1(const Vector& v, const Vector& w, const PopulationContext& ctx,
                                      bool flip_ratio_error = false) {
  Theorem1Report r;
  Vector eps_w = ratio_error(w, ctx);
  if (flip_ratio_error) eps_w = -eps_w;
  const Vector eps_v = bellman_residual(v, ctx);

  r.dr.lhs = population_dr(v, w, ctx) - ctx.reward;
  r.dr.rhs = (ctx.d_pi0.array() * eps_w.array() * eps_v.array()).sum();
  r.dr.residual = std::abs(r.dr.lhs - r.dr.rhs);

  r.sis.lhs = population_sis(w, ctx) - ctx.reward;
  r.sis.rhs = -(ctx.d_pi0.array() * eps_w.array() * ctx.r_pi.array()).sum();
  r.sis.residual = std::abs(r.sis.lhs - r.sis.rhs);

  r.val.lhs = population_val(v, ctx) - ctx.reward;
  r.val.rhs = ctx.d_pi.dot(eps_v);
  r.val.residual = std::abs(r.val.lhs - r.val.rhs);
  return r;
}

/// Average reward: R_DR - R^pi against E_{d_pi0}[eps_w eps_v] with
/// eps_w = w / E[w] - d_pi/d_pi0 and eps_v = r^pi - v + P v - R^pi.
inline BiasCheck verify_avg_theorem(const Vector& v, const Vector& w, const PopulationContext& ctx) {
  if (!ctx.disc.is_average()) throw std::invalid_argument("verify_avg_theorem requires average-reward mode");
  BiasCheck r;
  const double mean_w = ctx.d_pi0.dot(w);
  Vector eps_w(w.size());
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    eps_w[s] = w[s] / mean_w - (ctx.d_pi0[s] > 0.0 ? ctx.d_pi[s] / ctx.d_pi0[s] : 0.0);
  }
  const Vector eps_v = bellman_residual(v, ctx);
  r.lhs = population_dr_average(v, w, ctx) - ctx.reward;
  r.rhs = (ctx.d_pi0.array() * eps_w.array() * eps_v.array()).sum();
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

// ---------------------------------------------------------------------------
// Lagrangian and duality
// ---------------------------------------------------------------------------

/**
 * Discounted: (1-gamma) sum mu0 V - sum rho (V - r^pi - gamma P V).
 * Average: [sum rho r^pi - sum V (rho - T rho)] / sum rho.
 */
inline double lagrangian(const Vector& v, const Vector& rho, const PopulationContext& ctx) {
  detail::check_context_shape(ctx, v, "value function");
  detail::check_context_shape(ctx, rho, "density");
  if ((rho.array() < 0.0).any()) throw std::invalid_argument("lagrangian: negative density entry");
  if (ctx.disc.is_average()) {
    const double z = rho.sum();
    if (!(z > 0.0)) throw degenerate_weights_error("degenerate importance weights: sum rho = 0");
    const Vector t_rho = ctx.p_target.transpose() * rho;
    return (rho.dot(ctx.r_pi) - v.dot(rho - t_rho)) / z;
  }
  const double g = ctx.gamma();
  return (1.0 - g) * ctx.mdp.initial_dist.dot(v) - rho.dot(v - ctx.r_pi - g * (ctx.p_target * v));
}

/// rho - (1-gamma) mu0 - gamma T rho (discounted) or rho - T rho (average).
inline Vector dual_constraint(const Vector& rho, const PopulationContext& ctx) {
  const Vector t_rho = ctx.p_target.transpose() * rho;
  if (ctx.disc.is_average()) return rho - t_rho;
  return rho - (1.0 - ctx.gamma()) * ctx.mdp.initial_dist - ctx.gamma() * t_rho;
}

struct Theorem3Report {
  /// |L(v, rho) - R_DR(v, rho / d_pi0)|
  double lagrangian_residual = 0.0;
  /// max-norm of the dual constraint at rho = d_pi
  double constraint_residual = 0.0;
  /// |sum d_pi r^pi - R^pi|
  double objective_gap = 0.0;
  /// |(1-gamma) mu0 V^pi - sum d_pi r^pi|
  double duality_gap = 0.0;
};

inline Theorem3Report verify_theorem3(const Vector& v, const Vector& rho, const PopulationContext& ctx) {
  for (Eigen::Index s = 0; s < rho.size(); ++s) {
    if (rho[s] > 0.0 && !(ctx.d_pi0[s] > 0.0)) {
      throw coverage_error("behavior policy has no coverage at state " + std::to_string(s));
    }
  }
  const Vector w = density_ratio(rho, ctx.d_pi0).values;
  Theorem3Report r;
  const double dr = ctx.disc.is_average() ? population_dr_average(v, w, ctx) : population_dr(v, w, ctx);
  r.lagrangian_residual = std::abs(lagrangian(v, rho, ctx) - dr);
  r.constraint_residual = dual_constraint(ctx.d_pi, ctx).lpNorm<Eigen::Infinity>();
  const double dual = ctx.d_pi.dot(ctx.r_pi);
  r.objective_gap = std::abs(dual - ctx.reward);
  const double primal = ctx.disc.is_average() ? ctx.reward : population_val(ctx.v_pi, ctx);
  r.duality_gap = std::abs(primal - dual);
  return r;
}

// ---------------------------------------------------------------------------
// Variance decomposition
// ---------------------------------------------------------------------------

/**
 * Exact per-state checks of the residual term
 *   X = w(s) (beta (r + gamma v(s')) - v(s)) = w (-eps_v + delta1 + gamma delta2),
 *   delta1 = beta r - r^pi,   delta2 = beta v(s') - P v(s).
 */
struct VarianceExpansion {
  /// max_s |E[delta1 | s]|, max_s |E[delta2 | s]|
  double delta1_mean = 0.0;
  double delta2_mean = 0.0;
  /// max_s |Var[X | s] - w(s)^2 E[(delta1 + gamma delta2)^2 | s]|
  double conditional_residual = 0.0;
  /// |Var[X] - Var[w eps_v] - E[w^2 (delta1 + gamma delta2)^2]| under d_pi0
  double total_residual = 0.0;
  double variance = 0.0;
};

inline VarianceExpansion variance_expansion(const Vector& v, const Vector& w, const PopulationContext& ctx) {
  detail::require_discounted(ctx.disc, "variance_expansion");
  const double g = ctx.gamma();
  const TabularMDP& m = ctx.mdp;
  const Vector pv = ctx.p_target * v;
  const Vector eps_v = bellman_residual(v, ctx);
  VarianceExpansion out;
  double mean_x = 0.0;
  double second_x = 0.0;
  double mean_we = 0.0;
  double second_we = 0.0;
  double noise = 0.0;
  for (int s = 0; s < m.num_states; ++s) {
    double e1 = 0.0, e2 = 0.0, ex = 0.0, ex2 = 0.0, ed2 = 0.0;
    for (int a = 0; a < m.num_actions; ++a) {
      const double p0 = ctx.behavior(s, a);
      if (p0 == 0.0) continue;
      const double beta = importance_ratio(ctx.target, ctx.behavior, s, a);
      const double d1 = beta * m.reward(s, a) - ctx.r_pi[s];
      e1 += p0 * d1;
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        const double p = p0 * m.prob(s, a, s2);
        if (p == 0.0) continue;
        const double d2 = beta * v[s2] - pv[s];
        const double x = w[s] * (beta * (m.reward(s, a) + g * v[s2]) - v[s]);
        e2 += p * d2;
        ex += p * x;
        ex2 += p * x * x;
        ed2 += p * (d1 + g * d2) * (d1 + g * d2);
      }
    }
    out.delta1_mean = std::max(out.delta1_mean, std::abs(e1));
    out.delta2_mean = std::max(out.delta2_mean, std::abs(e2));
    const double cond_var = ex2 - ex * ex;
    out.conditional_residual = std::max(out.conditional_residual, std::abs(cond_var - w[s] * w[s] * ed2));
    const double d = ctx.d_pi0[s];
    mean_x += d * ex;
    second_x += d * ex2;
    mean_we += d * w[s] * eps_v[s];
    second_we += d * w[s] * w[s] * eps_v[s] * eps_v[s];
    noise += d * w[s] * w[s] * ed2;
  }
  out.variance = second_x - mean_x * mean_x;
  out.total_residual = std::abs(out.variance - (second_we - mean_we * mean_we) - noise);
  return out;
}

struct Theorem2Report {
  double var_dr = 0.0;
  double var_val = 0.0;
  double var_res = 0.0;
  /// var_dr - var_val - var_res, i.e. twice the sample covariance of VAL and the residual
  double difference = 0.0;
  double standard_error = 0.0;
  int runs = 0;
  VarianceExpansion expansion;
  bool monte_carlo_ok() const { return std::abs(difference) < 4.0 * standard_error; }
};

namespace detail {

inline double sample_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sample_variance(const std::vector<double>& x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace detail

/**
 * Monte Carlo check that Var[DR] = Var[VAL] + Var[SIS - CONN] with independent
 * initial and transition samples, plus the exact per-state expansion.
 * Run k draws its batch from derive_seed(seed, 2k) and its initial sample
 * from derive_seed(seed, 2k + 1).
 */
inline Theorem2Report verify_theorem2(const Vector& v, const Vector& w, const PopulationContext& ctx, int n_runs,
                                      int n, int horizon, int n0, std::uint64_t seed,
                                      Normalization mode = Normalization::constant) {
  if (mode != Normalization::constant) throw std::invalid_argument("theorem requires constant normalization");
  if (n_runs < 2) throw std::invalid_argument("verify_theorem2 needs at least two runs");
  const StateFunction vf(v, Role::value);
  const StateFunction wf(w, Role::density_ratio);
  const TransitionSampler sampler(ctx.mdp, ctx.behavior);
  std::vector<double> val(n_runs), res(n_runs), dr(n_runs);
  for (int k = 0; k < n_runs; ++k) {
    const TrajectoryBatch batch = sample_trajectories(sampler, n, horizon, derive_seed(seed, 2 * k));
    const InitialSample init = sample_initial(ctx.mdp, n0, derive_seed(seed, 2 * k + 1));
    const DoublyRobustParts parts =
        estimate_dr_parts(vf, wf, batch, init, ctx.target, ctx.behavior, ctx.disc, Normalization::constant);
    val[k] = parts.val.value;
    res[k] = parts.sis.value - parts.conn.value;
    dr[k] = parts.dr.value;
  }
  Theorem2Report r;
  r.runs = n_runs;
  r.var_dr = detail::sample_variance(dr);
  r.var_val = detail::sample_variance(val);
  r.var_res = detail::sample_variance(res);
  r.difference = r.var_dr - r.var_val - r.var_res;
  const double mv = detail::sample_mean(val);
  const double mr = detail::sample_mean(res);
  std::vector<double> products(n_runs);
  for (int k = 0; k < n_runs; ++k) products[k] = (val[k] - mv) * (res[k] - mr);
  r.standard_error = 2.0 * std::sqrt(detail::sample_variance(products) / n_runs);
  r.expansion = variance_expansion(v, w, ctx);
  return r;
}

}  // namespace drope
