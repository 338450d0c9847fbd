#include <gtest/gtest.h>

#include "support.hpp"

namespace drope {
namespace {

using testing::max_abs;

TEST(Softmax, HugeTemperatureIsNearlyUniform) {
  Rng rng(1);
  const Matrix q = Matrix::NullaryExpr(5, 4, [&] { return rng.uniform(-10.0, 10.0); });
  const Policy pi = make_softmax_policy(q, 1e9);
  EXPECT_LT((pi.probs.array() - 0.25).abs().maxCoeff(), 1e-6);
}

TEST(Softmax, ConstantRowIsExactlyUniform) {
  const Policy pi = make_softmax_policy(Matrix::Constant(2, 3, 7.5), 0.3);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(pi(0, a), 1.0 / 3.0);
}

TEST(Softmax, LogThreeRow) {
  Matrix q(1, 2);
  q << 0.0, std::log(3.0);
  const Policy pi = make_softmax_policy(q, 1.0);
  EXPECT_NEAR(pi(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(pi(0, 1), 0.75, 1e-15);
}

TEST(Softmax, LargeValuesDoNotOverflow) {
  Matrix q(1, 2);
  q << 1e6, 1e6 + 1.0;
  const Policy pi = make_softmax_policy(q, 1.0);
  EXPECT_TRUE(validate_policy(pi).empty());
  EXPECT_NEAR(pi(0, 1), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW(make_softmax_policy(Matrix::Zero(1, 2), 0.0), std::invalid_argument);
  EXPECT_THROW(make_softmax_policy(Matrix::Zero(1, 2), -1.0), std::invalid_argument);
}

TEST(OptimalQ, ZeroReward) {
  TabularMDP m = envs::gridworld(3);
  m.reward.setZero();
  EXPECT_EQ(max_abs(solve_optimal_q(m, Discount::discounted(0.9)).reshaped()), 0.0);
}

TEST(OptimalQ, SingleActionIsPolicyValue) {
  Rng rng(4);
  const TabularMDP m = envs::random_mdp(6, 1, rng);
  const Discount disc = Discount::discounted(0.8);
  const Vector q = solve_optimal_q(m, disc).col(0);
  EXPECT_LT(max_abs(q - exact_value(m, Policy::uniform(6, 1), disc).values), 1e-9);
}

TEST(OptimalQ, TwoStateMatchesPolicyEnumeration) {
  const TabularMDP m = envs::two_state();
  const Discount disc = Discount::discounted(0.9);
  const Matrix q = solve_optimal_q(m, disc);
  Vector best = Vector::Constant(2, -1e300);
  for (int a0 = 0; a0 < 2; ++a0) {
    for (int a1 = 0; a1 < 2; ++a1) {
      Matrix p = Matrix::Zero(2, 2);
      p(0, a0) = 1.0;
      p(1, a1) = 1.0;
      best = best.cwiseMax(exact_value(m, Policy(p), disc).values);
    }
  }
  EXPECT_LT(max_abs(q.rowwise().maxCoeff() - best), 1e-9);
}

TEST(Sampling, DeterministicModelGivesUniqueTrajectory) {
  TabularMDP m = TabularMDP::zeros(3, 2);
  for (int s = 0; s < 3; ++s) {
    m.prob(s, 0, (s + 1) % 3) = 1.0;
    m.prob(s, 1, s) = 1.0;
    m.reward(s, 0) = s;
  }
  m.initial_dist << 0.0, 1.0, 0.0;
  Matrix p = Matrix::Zero(3, 2);
  p.col(0).setOnes();
  const auto a = sample_trajectories(m, Policy(p), 2, 4, 1);
  const auto b = sample_trajectories(m, Policy(p), 2, 4, 999);
  EXPECT_EQ(a.trajectories, b.trajectories);
  const std::vector<int> states{1, 2, 0, 1};
  for (int t = 0; t < 4; ++t) {
    EXPECT_EQ(a.trajectories[0][t].state, states[t]);
    EXPECT_EQ(a.trajectories[0][t].time, t);
    EXPECT_EQ(a.trajectories[0][t].reward, states[t]);
  }
}

TEST(Sampling, SameSeedSameBatch) {
  const TabularMDP m = envs::gridworld(4);
  const Policy pi = Policy::uniform(m.num_states, 4);
  EXPECT_EQ(sample_trajectories(m, pi, 20, 30, 77), sample_trajectories(m, pi, 20, 30, 77));
  EXPECT_NE(sample_trajectories(m, pi, 20, 30, 77), sample_trajectories(m, pi, 20, 30, 78));
  EXPECT_EQ(sample_initial(m, 50, 3), sample_initial(m, 50, 3));
}

TEST(Sampling, TrajectoriesAreIndependentOfBatchSize) {
  const TabularMDP m = envs::gridworld(3);
  const Policy pi = Policy::uniform(m.num_states, 4);
  const auto small = sample_trajectories(m, pi, 3, 10, 5);
  const auto large = sample_trajectories(m, pi, 8, 10, 5);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(small.trajectories[i], large.trajectories[i]);
}

TEST(Sampling, FlipFrequencyWithinBinomialError) {
  const int n = 100000;
  const auto b = sample_trajectories(envs::two_state(), envs::flip_policy(0.5), n, 1, 2024);
  int flips = 0;
  for (const auto& traj : b.trajectories) flips += traj[0].action == envs::kFlip;
  EXPECT_NEAR(static_cast<double>(flips) / n, 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(Sampling, InitialFrequenciesWithinMultinomialError) {
  TabularMDP m = TabularMDP::zeros(4, 1);
  for (int s = 0; s < 4; ++s) m.prob(s, 0, s) = 1.0;
  m.initial_dist.setConstant(0.25);
  const int n = 100000;
  const InitialSample init = sample_initial(m, n, 31);
  std::vector<int> counts(4, 0);
  for (int s : init.states) ++counts[s];
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 3.0 * std::sqrt(0.1875 / n));
}

TEST(Sampling, PointMassInitial) {
  const InitialSample init = sample_initial(envs::two_state(), 100, 8);
  for (int s : init.states) EXPECT_EQ(s, 0);
}

TEST(Sampling, NextStateChiSquare) {
  const TabularMDP m = envs::gridworld(3);
  const Policy pi = Policy::uniform(m.num_states, 4);
  const auto b = sample_trajectories(m, pi, 400, 200, 17);
  std::vector<Matrix> counts(4, Matrix::Zero(m.num_states, m.num_states));
  for (const auto& traj : b.trajectories) {
    for (const Transition& tr : traj) counts[tr.action](tr.state, tr.next_state) += 1.0;
  }
  double chi2 = 0.0;
  int dof = 0;
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < 4; ++a) {
      const double total = counts[a].row(s).sum();
      if (total < 100) continue;
      int support = 0;
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        const double p = m.prob(s, a, s2);
        if (p == 0.0) {
          ASSERT_EQ(counts[a](s, s2), 0.0);
          continue;
        }
        ++support;
        const double expected = total * p;
        chi2 += (counts[a](s, s2) - expected) * (counts[a](s, s2) - expected) / expected;
      }
      dof += support - 1;
    }
  }
  ASSERT_GT(dof, 50);
  EXPECT_LT(chi2, dof + 4.0 * std::sqrt(2.0 * dof));
}

TEST(Sampling, RejectsEmptyRequests) {
  EXPECT_THROW(sample_trajectories(envs::two_state(), envs::flip_policy(0.5), 0, 5, 1), std::invalid_argument);
  EXPECT_THROW(sample_initial(envs::two_state(), 0, 1), std::invalid_argument);
}

TEST(Environments, TaxiStateCountMatchesEnumeration) {
  int enumerated = 0;
  const TabularMDP m = envs::taxi_mini(5, &enumerated);
  EXPECT_EQ(enumerated, envs::taxi_state_count(5));
  EXPECT_EQ(m.num_states, 500);
}

TEST(Environments, GridworldShape) {
  const TabularMDP m = envs::gridworld(4);
  EXPECT_EQ(m.num_states, 32);
  EXPECT_EQ(m.num_actions, 4);
}

}  // namespace
}  // namespace drope
