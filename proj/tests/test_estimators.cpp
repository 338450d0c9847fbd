#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

namespace drope {
namespace {

using testing::single_trajectory;

const Discount kGamma9 = Discount::discounted(0.9);

StateFunction value_fn(const Vector& v) { return StateFunction(v, Role::value); }
StateFunction ratio_fn(const Vector& w) { return StateFunction(w, Role::density_ratio); }

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// Per-trajectory discounted reward averages; their mean is MC and their
/// spread gives its standard error.
std::vector<double> trajectory_averages(const TrajectoryBatch& b, double gamma) {
  std::vector<double> out;
  for (const auto& traj : b.trajectories) {
    double num = 0.0, den = 0.0, g = 1.0;
    for (const Transition& tr : traj) {
      num += g * tr.reward;
      den += g;
      g *= gamma;
    }
    out.push_back(num / den);
  }
  return out;
}

TEST(Val, ConstantValue) {
  const InitialSample init{{0, 1, 1, 0}, 0};
  EXPECT_NEAR(estimate_val(StateFunction::constant(2, 4.0, Role::value), init, kGamma9).value, 0.4, 1e-15);
}

TEST(Val, HalfDiscountArithmetic) {
  Vector v(3);
  v << 0.0, 2.0, 9.0;
  const InitialSample init{{1, 1, 1}, 0};
  EXPECT_EQ(estimate_val(value_fn(v), init, Discount::discounted(0.5)).value, 1.0);
}

TEST(Val, ExactValueRecoversReward) {
  const TabularMDP m = envs::two_state();
  const Policy pi = envs::flip_policy(0.3);
  const InitialSample init = sample_initial(m, 100000, 5);
  const double est = estimate_val(exact_value(m, pi, kGamma9), init, kGamma9).value;
  EXPECT_NEAR(est, exact_reward(m, pi, kGamma9), 1e-12);  // mu0 is a point mass
}

TEST(Val, RejectsEmptySampleAndAverageMode) {
  EXPECT_THROW(estimate_val(StateFunction::constant(2, 1.0, Role::value), InitialSample{}, kGamma9),
               std::invalid_argument);
  EXPECT_THROW(estimate_val(StateFunction::constant(2, 1.0, Role::value), InitialSample{{0}, 0}, Discount::average()),
               std::invalid_argument);
}

TEST(Sis, OnPolicyUnitWeightsGiveDiscountedMean) {
  const TabularMDP m = envs::two_state();
  const Policy pi = envs::flip_policy(0.4);
  const auto b = sample_trajectories(m, pi, 30, 12, 3);
  const double est =
      estimate_sis(StateFunction::constant(2, 1.0, Role::density_ratio), b, pi, pi, kGamma9, Normalization::self_normalized)
          .value;
  EXPECT_NEAR(est, estimate_onpolicy_mc(b, kGamma9).value, 1e-14);
}

TEST(Sis, SingleTransitionReturnsItsReward) {
  const auto b = single_trajectory({{1, envs::kFlip, 0.2, 0, 0}});
  Vector w(2);
  w << 0.3, 7.0;
  const Estimate e =
      estimate_sis(ratio_fn(w), b, envs::flip_policy(0.3), envs::flip_policy(0.5), kGamma9, Normalization::self_normalized);
  EXPECT_EQ(e.value, 0.2);
  EXPECT_EQ(e.mode, Normalization::self_normalized);
}

TEST(Sis, ZeroWeightsAreDegenerate) {
  const auto b = sample_trajectories(envs::two_state(), envs::flip_policy(0.5), 3, 4, 1);
  EXPECT_THROW(estimate_sis(StateFunction::constant(2, 0.0, Role::density_ratio), b, envs::flip_policy(0.3),
                            envs::flip_policy(0.5), kGamma9, Normalization::self_normalized),
               degenerate_weights_error);
}

TEST(Sis, CoverageViolationThrows) {
  const auto b = single_trajectory({{0, envs::kStay, 0.0, 0, 0}});
  EXPECT_THROW(estimate_sis(StateFunction::constant(2, 1.0, Role::density_ratio), b, envs::flip_policy(0.5),
                            envs::flip_policy(1.0), kGamma9, Normalization::self_normalized),
               coverage_error);
}

TEST(Sis, ExactRatioIsConsistentOnTwoState) {
  const TabularMDP m = envs::two_state();
  const Policy pi = envs::flip_policy(0.3);
  const Policy pi0 = envs::flip_policy(0.5);
  const StateFunction w = exact_density_ratio(m, pi, pi0, kGamma9);
  const auto b = sample_trajectories(m, pi0, 10000, 200, 99);
  const double est = estimate_sis(w, b, pi, pi0, kGamma9, Normalization::self_normalized).value;
  // delta-method standard error of the ratio estimator, trajectories as units
  double z = 0.0, ss = 0.0;
  for (const auto& traj : b.trajectories) {
    double num = 0.0, den = 0.0, g = 1.0;
    for (const Transition& tr : traj) {
      const double weight = g * w[tr.state] * importance_ratio(pi, pi0, tr.state, tr.action);
      num += weight * tr.reward;
      den += weight;
      g *= 0.9;
    }
    z += den;
    ss += (num - est * den) * (num - est * den);
  }
  const double se = std::sqrt(ss) / z;
  EXPECT_LT(std::abs(est - exact_reward(m, pi, kGamma9)), 4.0 * se);
}

TEST(Conn, ZeroValueGivesZero) {
  const auto b = sample_trajectories(envs::two_state(), envs::flip_policy(0.5), 4, 6, 2);
  Vector w(2);
  w << 0.7, 1.4;
  EXPECT_EQ(estimate_conn(StateFunction::constant(2, 0.0, Role::value), ratio_fn(w), b, envs::flip_policy(0.3),
                          envs::flip_policy(0.5), kGamma9, Normalization::self_normalized)
                .value,
            0.0);
}

TEST(Conn, ConstantValueGivesDiscountComplement) {
  const auto b = sample_trajectories(envs::gridworld(3), Policy::uniform(18, 4), 6, 9, 4);
  Rng rng(6);
  const Vector w = envs::random_vector(18, 0.1, 2.0, rng);
  const Policy pi = envs::random_policy(18, 4, rng);
  const double c = 3.0;
  const double est = estimate_conn(StateFunction::constant(18, c, Role::value), ratio_fn(w), b, pi,
                                   Policy::uniform(18, 4), kGamma9, Normalization::self_normalized)
                         .value;
  EXPECT_NEAR(est, (1.0 - 0.9) * c, 1e-14);
}

class RandomBatch : public ::testing::TestWithParam<std::uint32_t> {};

TEST_P(RandomBatch, DecompositionIdentityAndScaleInvariance) {
  const IdentityCase c = random_identity_case(GetParam());
  const auto b = sample_trajectories(c.mdp, c.behavior, 20, 15, GetParam());
  const InitialSample init = sample_initial(c.mdp, 20, GetParam() + 1);
  const StateFunction v = value_fn(c.v);
  for (Normalization mode : {Normalization::self_normalized, Normalization::constant}) {
    const DoublyRobustParts p = estimate_dr_parts(v, ratio_fn(c.w), b, init, c.target, c.behavior, c.disc, mode);
    const double sis = estimate_sis(ratio_fn(c.w), b, c.target, c.behavior, c.disc, mode).value;
    const double val = estimate_val(v, init, c.disc).value;
    const double conn = estimate_conn(v, ratio_fn(c.w), b, c.target, c.behavior, c.disc, mode).value;
    EXPECT_EQ(p.dr.value, sis + val - conn);
    EXPECT_EQ(estimate_dr(v, ratio_fn(c.w), b, init, c.target, c.behavior, c.disc, mode).value, p.dr.value);
  }
  const auto self = Normalization::self_normalized;
  for (double scale : {0.25, 2.0, 1024.0}) {
    const StateFunction ws = ratio_fn(scale * c.w);
    EXPECT_EQ(estimate_sis(ws, b, c.target, c.behavior, c.disc, self).value,
              estimate_sis(ratio_fn(c.w), b, c.target, c.behavior, c.disc, self).value);
    EXPECT_EQ(estimate_dr(v, ws, b, init, c.target, c.behavior, c.disc, self).value,
              estimate_dr(v, ratio_fn(c.w), b, init, c.target, c.behavior, c.disc, self).value);
    EXPECT_EQ(estimate_dr_average(v, ws, b, c.target, c.behavior).value,
              estimate_dr_average(v, ratio_fn(c.w), b, c.target, c.behavior).value);
  }
  const double dr = estimate_dr(v, ratio_fn(c.w), b, init, c.target, c.behavior, c.disc, self).value;
  EXPECT_NEAR(estimate_dr(v, ratio_fn(3.0 * c.w), b, init, c.target, c.behavior, c.disc, self).value, dr,
              1e-13 * std::max(1.0, std::abs(dr)));
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomBatch, ::testing::Values(1u, 2u, 3u, 17u, 2019u));

TEST(Dr, ZeroWeightsInConstantModeReduceToVal) {
  const TabularMDP m = envs::two_state();
  const auto b = sample_trajectories(m, envs::flip_policy(0.5), 5, 5, 3);
  const InitialSample init = sample_initial(m, 5, 4);
  const StateFunction v = exact_value(m, envs::flip_policy(0.3), kGamma9);
  const StateFunction zero = StateFunction::constant(2, 0.0, Role::density_ratio);
  const auto pi = envs::flip_policy(0.3), pi0 = envs::flip_policy(0.5);
  EXPECT_EQ(estimate_dr(v, zero, b, init, pi, pi0, kGamma9, Normalization::constant).value,
            estimate_val(v, init, kGamma9).value);
  EXPECT_THROW(estimate_dr(v, zero, b, init, pi, pi0, kGamma9, Normalization::self_normalized),
               degenerate_weights_error);
}

TEST(Dr, ConstantModeIsUnbiasedForPopulationLimit) {
  // gamma = 0.5 and T = 60 make the truncation negligible
  const Discount disc = Discount::discounted(0.5);
  const Fixture fx = two_state_fixture();
  const PopulationContext ctx(fx.mdp, fx.target, fx.behavior, disc);
  const Vector v = corrupt_value(ctx.v_pi);
  const Vector w = density_ratio(corrupt_density(ctx.d_pi), ctx.d_pi0).values;
  std::vector<double> est;
  for (int k = 0; k < 400; ++k) {
    const auto b = sample_trajectories(fx.mdp, fx.behavior, 10, 60, derive_seed(11, 2 * k));
    const InitialSample init = sample_initial(fx.mdp, 10, derive_seed(11, 2 * k + 1));
    est.push_back(estimate_dr(value_fn(v), ratio_fn(w), b, init, fx.target, fx.behavior, disc, Normalization::constant)
                      .value);
  }
  const Moments mo = moments(est);
  EXPECT_LT(std::abs(mo.mean - population_dr(v, w, ctx)), 4.0 * mo.se);
}

TEST(Dr, ErrorShrinksWithSamplesGivenExactRatio) {
  const Fixture fx = two_state_fixture();
  const PopulationContext ctx(fx.mdp, fx.target, fx.behavior, kGamma9);
  const StateFunction v = value_fn(corrupt_value(ctx.v_pi));
  const StateFunction w = ratio_fn(ctx.true_ratio());
  std::vector<double> rms;
  for (int n : {10, 40, 160}) {
    double ss = 0.0;
    for (int k = 0; k < 100; ++k) {
      const auto b = sample_trajectories(fx.mdp, fx.behavior, n, 100, derive_seed(n, 2 * k));
      const InitialSample init = sample_initial(fx.mdp, n, derive_seed(n, 2 * k + 1));
      const double e =
          estimate_dr(v, w, b, init, fx.target, fx.behavior, kGamma9, Normalization::self_normalized).value - ctx.reward;
      ss += e * e;
    }
    rms.push_back(std::sqrt(ss / 100));
  }
  EXPECT_GT(rms[0], rms[1]);
  EXPECT_GT(rms[1], rms[2]);
}

TEST(DrAverage, ConstantValueFormula) {
  Rng rng(12);
  const TabularMDP m = envs::random_mdp(5, 3, rng);
  const Policy pi = envs::random_policy(5, 3, rng);
  const Policy pi0 = envs::random_policy(5, 3, rng);
  const Vector w = envs::random_vector(5, 0.2, 2.0, rng);
  const auto b = sample_trajectories(m, pi0, 7, 11, 5);
  double num = 0.0, corr = 0.0, z = 0.0;
  for (const auto& traj : b.trajectories) {
    for (const Transition& tr : traj) {
      const double beta = importance_ratio(pi, pi0, tr.state, tr.action);
      num += w[tr.state] * beta * tr.reward;
      corr += w[tr.state] * (beta - 1.0);
      z += w[tr.state];
    }
  }
  const double c = 2.5;
  const double est = estimate_dr_average(StateFunction::constant(5, c, Role::value), ratio_fn(w), b, pi, pi0).value;
  EXPECT_NEAR(est, num / z + c * corr / z, 1e-13);
  const double on_policy =
      estimate_dr_average(StateFunction::constant(5, c, Role::value), ratio_fn(Vector::Ones(5)), b, pi0, pi0).value;
  double plain = 0.0;
  for (const auto& traj : b.trajectories) {
    for (const Transition& tr : traj) plain += tr.reward;
  }
  EXPECT_NEAR(on_policy, plain / b.num_transitions(), 1e-14);
}

TEST(DrAverage, TwoStateStationaryOracle) {
  const Fixture fx = two_state_fixture();
  const PopulationContext ctx(fx.mdp, fx.target, fx.behavior, Discount::average());
  const StateFunction v = value_fn(ctx.v_pi);
  const StateFunction w = ratio_fn(ctx.true_ratio());
  const auto b = sample_trajectories(fx.mdp, fx.behavior, 200, 500, 8);
  std::vector<double> per_traj;
  for (const auto& traj : b.trajectories) {
    TrajectoryBatch one;
    one.trajectories.push_back(traj);
    per_traj.push_back(estimate_dr_average(v, w, one, fx.target, fx.behavior).value);
  }
  const Moments mo = moments(per_traj);
  const double est = estimate_dr_average(v, w, b, fx.target, fx.behavior).value;
  EXPECT_LT(std::abs(est - ctx.reward), 4.0 * mo.se);
}

TEST(OnPolicyMc, Arithmetic) {
  const auto b = single_trajectory({{0, 0, 0.0, 0, 0}, {0, 0, 1.0, 0, 0}});
  EXPECT_NEAR(estimate_onpolicy_mc(b, Discount::discounted(0.5)).value, 1.0 / 3.0, 1e-15);
  TabularMDP m = envs::two_state();
  m.reward.setConstant(0.7);
  const auto c = sample_trajectories(m, envs::flip_policy(0.2), 5, 9, 1);
  EXPECT_NEAR(estimate_onpolicy_mc(c, kGamma9).value, 0.7, 1e-15);
}

TEST(OnPolicyMc, ConvergesToOracle) {
  const TabularMDP m = envs::two_state();
  const Policy pi = envs::flip_policy(0.3);
  const auto b = sample_trajectories(m, pi, 20000, 150, 123);
  const Moments mo = moments(trajectory_averages(b, 0.9));
  EXPECT_NEAR(estimate_onpolicy_mc(b, kGamma9).value, mo.mean, 1e-12);
  EXPECT_LT(std::abs(mo.mean - exact_reward(m, pi, kGamma9)), 4.0 * mo.se);
}

TEST(NaiveAverage, TracksBehaviorReward) {
  const TabularMDP m = envs::two_state();
  const Policy pi0 = envs::flip_policy(0.5);
  const auto b = sample_trajectories(m, pi0, 20000, 150, 321);
  const Moments mo = moments(trajectory_averages(b, 0.9));
  const double naive = estimate_naive_average(b, kGamma9).value;
  EXPECT_EQ(naive, estimate_onpolicy_mc(b, kGamma9).value);
  EXPECT_LT(std::abs(naive - exact_reward(m, pi0, kGamma9)), 4.0 * mo.se);
  EXPECT_GT(std::abs(naive - exact_reward(m, envs::flip_policy(0.0), kGamma9)), 10.0 * mo.se);
}

TEST(NaiveAverage, ConstantRewardIgnoresMismatch) {
  TabularMDP m = envs::two_state();
  m.reward.setConstant(-1.5);
  const auto b = sample_trajectories(m, envs::flip_policy(0.9), 4, 7, 2);
  EXPECT_NEAR(estimate_naive_average(b, kGamma9).value, -1.5, 1e-15);
}

TEST(TrajectoryIs, OnPolicyIsMonteCarlo) {
  const Policy pi = envs::flip_policy(0.3);
  const auto b = sample_trajectories(envs::two_state(), pi, 25, 40, 6);
  const double mc = estimate_onpolicy_mc(b, kGamma9).value;
  EXPECT_NEAR(estimate_trajectory_is(b, pi, pi, kGamma9, false).value, mc, 1e-14);
  EXPECT_NEAR(estimate_trajectory_is(b, pi, pi, kGamma9, true).value, mc, 1e-14);
}

TEST(TrajectoryIs, SingleStepMatchesSis) {
  const Policy pi = envs::flip_policy(0.3);
  const Policy pi0 = envs::flip_policy(0.6);
  const auto b = sample_trajectories(envs::two_state(), pi0, 50, 1, 6);
  const StateFunction ones = StateFunction::constant(2, 1.0, Role::density_ratio);
  EXPECT_NEAR(estimate_trajectory_is(b, pi, pi0, kGamma9, true).value,
              estimate_sis(ones, b, pi, pi0, kGamma9, Normalization::self_normalized).value, 1e-14);
  EXPECT_NEAR(estimate_trajectory_is(b, pi, pi0, kGamma9, false).value,
              estimate_sis(ones, b, pi, pi0, kGamma9, Normalization::constant).value, 1e-14);
}

TEST(TrajectoryIs, ZeroProductIsDegenerateWhenSelfNormalized) {
  Matrix stay(2, 2);
  stay << 1, 0, 1, 0;
  const auto b = single_trajectory({{0, envs::kFlip, 0.5, 1, 0}});
  EXPECT_THROW(estimate_trajectory_is(b, Policy(stay), envs::flip_policy(0.5), kGamma9, true),
               degenerate_weights_error);
  EXPECT_EQ(estimate_trajectory_is(b, Policy(stay), envs::flip_policy(0.5), kGamma9, false).value, 0.0);
}

TEST(EstimatorNames, RoundTrip) {
  for (auto id : {EstimatorId::val, EstimatorId::sis, EstimatorId::conn, EstimatorId::dr, EstimatorId::dr_average,
                  EstimatorId::onpolicy_mc, EstimatorId::naive_average, EstimatorId::trajectory_is}) {
    EXPECT_EQ(parse_estimator(estimator_name(id)), id);
  }
  EXPECT_FALSE(parse_estimator("WDR").has_value());
}

}  // namespace
}  // namespace drope
