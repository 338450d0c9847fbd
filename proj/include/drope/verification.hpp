#pragma once

// Identity checks over seeded random models and the fixed fixtures, shared
// by `drope verify` and the test suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drope/analysis.hpp"
#include "drope/environments.hpp"
#include "drope/learners.hpp"
#include "drope/seeds.hpp"
#include "drope/simulate.hpp"

namespace drope {

struct CheckResult {
  std::string name;
  int cases = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;

  bool passed() const { return cases > 0 && max_residual < tolerance; }
  void record(double residual) {
    ++cases;
    // NaN must fail the check
    if (!(residual <= max_residual)) max_residual = std::isnan(residual) ? INFINITY : residual;
  }
};

/// A random model with random functions: Dirichlet(1) rows, rewards U[0,1],
/// gamma U[0.5, 0.99], v U[-5,5], w U[0,3], rho U[0,1], f and g U[-1,1].
struct IdentityCase {
  TabularMDP mdp;
  Policy target;
  Policy behavior;
  Discount disc = Discount::discounted(0.9);
  Vector v;
  Vector w;
  Vector rho;
  Vector f;
  Vector g;
};

inline IdentityCase random_identity_case(std::uint64_t seed, int num_states = 10, int num_actions = 3) {
  Rng rng(seed);
  IdentityCase c;
  c.mdp = envs::random_mdp(num_states, num_actions, rng);
  c.target = envs::random_policy(num_states, num_actions, rng);
  c.behavior = envs::random_policy(num_states, num_actions, rng);
  c.disc = Discount::discounted(rng.uniform(0.5, 0.99));
  c.v = envs::random_vector(num_states, -5.0, 5.0, rng);
  c.w = envs::random_vector(num_states, 0.0, 3.0, rng);
  c.rho = envs::random_vector(num_states, 0.0, 1.0, rng);
  c.f = envs::random_vector(num_states, -1.0, 1.0, rng);
  c.g = envs::random_vector(num_states, -1.0, 1.0, rng);
  return c;
}

/// A named fixture with target/behavior policies and corrupted ("rough")
/// versions of V^pi and d_pi.
struct Fixture {
  std::string name;
  TabularMDP mdp;
  Policy target;
  Policy behavior;
};

/// TwoState with pi(flip) = 0.3 against pi0(flip) = 0.5.
inline Fixture two_state_fixture() { return {"two_state", envs::two_state(), envs::flip_policy(0.3), envs::flip_policy(0.5)}; }

/// gridworld(n) with softmax(Q*, tau) against softmax(Q*, tau0), Q* at gamma = 0.99.
inline Fixture gridworld_fixture(int n, double tau = 1.0, double tau0 = 1.5) {
  TabularMDP m = envs::gridworld(n);
  const Matrix q = solve_optimal_q(m, Discount::discounted(0.99));
  return {"gridworld(" + std::to_string(n) + ")", std::move(m), make_softmax_policy(q, tau), make_softmax_policy(q, tau0)};
}

/// V scaled by 1.2 plus a state-dependent offset; rho scaled by 1.2 on even
/// states and renormalized.
inline Vector corrupt_value(const Vector& v) {
  Vector out = 1.2 * v;
  for (Eigen::Index s = 0; s < out.size(); ++s) out[s] += 0.1 * static_cast<double>(s % 3);
  return out;
}

inline Vector corrupt_density(const Vector& d) {
  Vector out = d;
  for (Eigen::Index s = 0; s < out.size(); s += 2) out[s] *= 1.2;
  return out / out.sum();
}

/// bias(alpha, beta) of population DR when V and rho are mixed against exact
/// complements, i.e. the harness convention alpha * rough + (1 - alpha) * exact.
inline double mixed_population_bias(const PopulationContext& ctx, const Vector& v_rough, const Vector& rho_rough,
                                    double alpha, double beta) {
  const StateFunction v = mix_value(StateFunction(ctx.v_pi, Role::value), StateFunction(v_rough, Role::value), alpha);
  const StateFunction rho =
      mix_density(StateFunction(ctx.d_pi, Role::density), StateFunction(rho_rough, Role::density), beta);
  const Vector w = density_ratio(rho.values, ctx.d_pi0).values;
  if (ctx.disc.is_average()) return population_dr_average(v.values, w, ctx) - ctx.reward;
  return population_dr(v.values, w, ctx) - ctx.reward;
}

inline constexpr double kBiasTolerance = 1e-9;
inline constexpr double kLagrangianTolerance = 1e-12;
inline constexpr double kDualityTolerance = 1e-9;
inline constexpr double kConstraintTolerance = 1e-10;
inline constexpr double kAdjointTolerance = 1e-12;
inline constexpr double kDeltaMeanTolerance = 1e-12;
inline constexpr double kExpansionTolerance = 1e-10;

struct VerifyOptions {
  /// negate eps_w in the bias identity
  bool inject_fault = false;
};

/**
 * Runs every exact identity check over `seeds` random 10-state models and the
 * TwoState / gridworld(4) fixtures.
 */
inline std::vector<CheckResult> run_identity_checks(std::span<const std::uint32_t> seeds,
                                                    const VerifyOptions& opt = {}) {
  CheckResult bias{"bias identity (DR)", 0, 0.0, kBiasTolerance};
  CheckResult sis_bias{"bias identity (SIS)", 0, 0.0, kBiasTolerance};
  CheckResult val_bias{"bias identity (VAL)", 0, 0.0, kBiasTolerance};
  CheckResult exact_v{"double robustness, exact V", 0, 0.0, kBiasTolerance};
  CheckResult exact_w{"double robustness, exact w", 0, 0.0, kBiasTolerance};
  CheckResult lag{"Lagrangian = population DR", 0, 0.0, kLagrangianTolerance};
  CheckResult lag_v{"L(V^pi, rho) = R^pi", 0, 0.0, kLagrangianTolerance};
  CheckResult lag_d{"L(V, d_pi) = R^pi", 0, 0.0, kLagrangianTolerance};
  CheckResult duality{"duality gap", 0, 0.0, kDualityTolerance};
  CheckResult constraint{"dual constraint at d_pi", 0, 0.0, kConstraintTolerance};
  CheckResult adjoint{"adjointness <Pf,g> = <f,Tg>", 0, 0.0, kAdjointTolerance};
  CheckResult delta{"E[delta1|s] = E[delta2|s] = 0", 0, 0.0, kDeltaMeanTolerance};
  CheckResult expansion{"per-state variance expansion", 0, 0.0, kExpansionTolerance};
  CheckResult bilinear{"bias bilinearity in (alpha, beta)", 0, 0.0, kBiasTolerance};
  CheckResult avg{"average-reward bias identity", 0, 0.0, kBiasTolerance};

  for (std::uint32_t seed : seeds) {
    const IdentityCase c = random_identity_case(seed);
    const PopulationContext ctx(c.mdp, c.target, c.behavior, c.disc);
    const Theorem1Report t1 = verify_theorem1(c.v, c.w, ctx, opt.inject_fault);
    bias.record(t1.dr.residual);
    sis_bias.record(t1.sis.residual);
    val_bias.record(t1.val.residual);
    exact_v.record(std::abs(population_dr(ctx.v_pi, c.w, ctx) - ctx.reward));
    exact_w.record(std::abs(population_dr(c.v, ctx.true_ratio(), ctx) - ctx.reward));

    const Theorem3Report t3 = verify_theorem3(c.v, c.rho, ctx);
    lag.record(t3.lagrangian_residual);
    duality.record(t3.duality_gap);
    constraint.record(t3.constraint_residual);
    lag_v.record(std::abs(lagrangian(ctx.v_pi, c.rho, ctx) - ctx.reward));
    lag_d.record(std::abs(lagrangian(c.v, ctx.d_pi, ctx) - ctx.reward));

    const double lhs = apply_P(c.mdp, c.target, StateFunction(c.f, Role::test_fn)).values.dot(c.g);
    const double rhs = c.f.dot(apply_T(c.mdp, c.target, StateFunction(c.g, Role::test_fn)).values);
    adjoint.record(std::abs(lhs - rhs));

    const VarianceExpansion ve = variance_expansion(c.v, c.w, ctx);
    delta.record(std::max(ve.delta1_mean, ve.delta2_mean));
    expansion.record(std::max(ve.conditional_residual, ve.total_residual));
  }

  const Discount gamma = Discount::discounted(0.9);
  for (const Fixture& fx : {two_state_fixture(), gridworld_fixture(4)}) {
    const Discount disc = fx.name == "two_state" ? gamma : Discount::discounted(0.99);
    const PopulationContext ctx(fx.mdp, fx.target, fx.behavior, disc);
    const Vector v_rough = corrupt_value(ctx.v_pi);
    const Vector rho_rough = corrupt_density(ctx.d_pi);
    const double corner = mixed_population_bias(ctx, v_rough, rho_rough, 1.0, 1.0);
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      for (double b : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        bilinear.record(std::abs(mixed_population_bias(ctx, v_rough, rho_rough, a, b) - a * b * corner));
      }
    }
    const Vector w_rough = density_ratio(rho_rough, ctx.d_pi0).values;
    const VarianceExpansion ve = variance_expansion(v_rough, w_rough, ctx);
    delta.record(std::max(ve.delta1_mean, ve.delta2_mean));
    expansion.record(std::max(ve.conditional_residual, ve.total_residual));

    const PopulationContext actx(fx.mdp, fx.target, fx.behavior, Discount::average());
    const Vector va = corrupt_value(actx.v_pi);
    const Vector wa = density_ratio(corrupt_density(actx.d_pi), actx.d_pi0).values;
    avg.record(verify_avg_theorem(va, wa, actx).residual);
    avg.record(std::abs(population_dr_average(actx.v_pi, wa, actx) - actx.reward));
    avg.record(std::abs(population_dr_average(va, 2.5 * actx.true_ratio(), actx) - actx.reward));
  }

  return {bias, sis_bias, val_bias, exact_v, exact_w, lag, lag_v, lag_d, duality, constraint,
          adjoint, delta, expansion, bilinear, avg};
}

inline std::vector<CheckResult> run_identity_checks(const VerifyOptions& opt = {}) {
  return run_identity_checks(kIdentitySeeds, opt);
}

}  // namespace drope
