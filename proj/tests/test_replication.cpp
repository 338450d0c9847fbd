#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

namespace drope {
namespace {

struct Harness {
  PopulationContext ctx;
  ReplicationInputs inputs;
};

Harness two_state_setup(Discount disc = Discount::discounted(0.9)) {
  const Fixture fx = two_state_fixture();
  PopulationContext ctx(fx.mdp, fx.target, fx.behavior, disc);
  ReplicationInputs in{StateFunction(ctx.v_pi, Role::value), StateFunction(corrupt_value(ctx.v_pi), Role::value),
                       StateFunction(ctx.d_pi, Role::density),
                       StateFunction(corrupt_density(ctx.d_pi), Role::density)};
  return {std::move(ctx), std::move(in)};
}

TEST(PairwiseSum, MatchesExactSums) {
  std::vector<double> ones(1000, 1.0);
  EXPECT_EQ(pairwise_sum(ones), 1000.0);
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
  std::vector<double> tenths(1 << 20, 0.1);
  const double exact = 0.1 * (1 << 20);
  EXPECT_LT(std::abs(pairwise_sum(tenths) - exact), 1e-9);
}

TEST(Summarize, SingleRun) {
  ReplicationReport r;
  r.truth = 1.0;
  r.estimates = {1.5};
  summarize(r);
  EXPECT_EQ(r.variance, 0.0);
  EXPECT_EQ(r.bias_sq, 0.25);
  EXPECT_EQ(r.mse, 0.25);
}

TEST(Summarize, MseDecomposition) {
  ReplicationReport r;
  r.truth = 0.3;
  Rng rng(9);
  for (int k = 0; k < 500; ++k) r.estimates.push_back(rng.uniform(-1.0, 2.0));
  summarize(r);
  const double k = 500.0;
  EXPECT_NEAR(r.mse, r.bias_sq + r.variance * (k - 1.0) / k, 1e-13);
  EXPECT_GT(r.mse_se, 0.0);
}

TEST(Replications, ThreadCountDoesNotChangeResults) {
  const Harness s = two_state_setup();
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::val, EstimatorId::sis, EstimatorId::dr, EstimatorId::trajectory_is,
                    EstimatorId::onpolicy_mc};
  cfg.ns = {5, 20};
  cfg.horizons = {10, 30};
  cfg.alphas = {0.0, 1.0};
  cfg.runs = 25;
  cfg.seed = 42;
  cfg.threads = 1;
  const auto serial = run_replications(s.ctx, s.inputs, cfg);
  cfg.threads = 6;
  const auto parallel = run_replications(s.ctx, s.inputs, cfg);
  ASSERT_EQ(serial.size(), 5u * 4u * 2u);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].estimates, parallel[i].estimates);
    EXPECT_EQ(serial[i].id, parallel[i].id);
  }
  cfg.seed = 43;
  // index 8 is the first SIS cell; VAL is deterministic under a point-mass mu0
  ASSERT_EQ(serial[8].id, EstimatorId::sis);
  EXPECT_NE(run_replications(s.ctx, s.inputs, cfg)[8].estimates, serial[8].estimates);
}

TEST(Replications, AlphaSweepSharesData) {
  const Harness s = two_state_setup();
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::sis};
  cfg.ns = {10};
  cfg.horizons = {20};
  cfg.alphas = {0.0, 0.5, 1.0};
  cfg.runs = 10;
  const auto reports = run_replications(s.ctx, s.inputs, cfg);
  ASSERT_EQ(reports.size(), 3u);
  // SIS ignores V, so the alpha sweep must give identical numbers
  EXPECT_EQ(reports[0].estimates, reports[1].estimates);
  EXPECT_EQ(reports[0].estimates, reports[2].estimates);
}

TEST(Replications, PopulationModeMatchesAnalyticBias) {
  const Harness s = two_state_setup();
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::dr};
  cfg.alphas = {0.0, 0.5, 1.0};
  cfg.betas = {0.0, 1.0};
  cfg.ns = {1};
  cfg.horizons = {1};
  cfg.population = true;
  for (const auto& r : run_replications(s.ctx, s.inputs, cfg)) {
    ASSERT_EQ(r.estimates.size(), 1u);
    const double bias = mixed_population_bias(s.ctx, s.inputs.v_rough.values, s.inputs.rho_rough.values, r.alpha, r.beta);
    EXPECT_NEAR(r.estimates[0] - r.truth, bias, 1e-12);
    if (r.alpha == 0.0 || r.beta == 0.0) {
      EXPECT_LT(std::abs(r.estimates[0] - r.truth), 1e-12);
    }
  }
}

TEST(Replications, TruncationBiasOfMonteCarloShrinks) {
  const Harness s = two_state_setup();
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::onpolicy_mc};
  cfg.ns = {50};
  cfg.horizons = {3, 100};
  cfg.runs = 200;
  const auto r = run_replications(s.ctx, s.inputs, cfg);
  EXPECT_GT(r[0].bias_sq, 100.0 * r[1].bias_sq);
}

TEST(Replications, TotalSampleBudget) {
  const Harness s = two_state_setup();
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::sis};
  cfg.horizons = {10, 40};
  cfg.total_samples = 400;
  cfg.runs = 2;
  const auto r = run_replications(s.ctx, s.inputs, cfg);
  // reports are ordered by n
  EXPECT_EQ(r[0].n, 10);
  EXPECT_EQ(r[0].horizon, 40);
  EXPECT_EQ(r[1].n, 40);
  cfg.horizons = {30};
  EXPECT_THROW(run_replications(s.ctx, s.inputs, cfg), config_error);
}

TEST(Replications, DegenerateRunsAreCounted) {
  Harness s = two_state_setup();
  s.inputs.rho_rough = StateFunction::constant(2, 0.0, Role::density);
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::sis};
  cfg.ns = {4};
  cfg.horizons = {4};
  cfg.runs = 10;
  const auto r = run_replications(s.ctx, s.inputs, cfg);
  EXPECT_EQ(r[0].errored_runs, 10);
  EXPECT_TRUE(r[0].failed);
}

TEST(Replications, RejectsInvalidGrids) {
  const Harness s = two_state_setup();
  auto expect_rejected = [&](auto edit, const PopulationContext& ctx) {
    ReplicationConfig cfg;
    cfg.runs = 1;
    edit(cfg);
    EXPECT_THROW(run_replications(ctx, s.inputs, cfg), config_error);
  };
  expect_rejected([](ReplicationConfig& c) { c.estimators = {EstimatorId::conn}; }, s.ctx);
  expect_rejected([](ReplicationConfig& c) { c.estimators = {EstimatorId::dr_average}; }, s.ctx);
  expect_rejected([](ReplicationConfig& c) { c.runs = 0; }, s.ctx);
  expect_rejected([](ReplicationConfig& c) { c.ns.clear(); }, s.ctx);
  expect_rejected([](ReplicationConfig& c) { c.alphas = {1.5}; }, s.ctx);
  expect_rejected([](ReplicationConfig& c) {
    c.estimators = {EstimatorId::trajectory_is};
    c.population = true;
  }, s.ctx);
  const Harness avg = two_state_setup(Discount::average());
  expect_rejected([](ReplicationConfig&) {}, avg.ctx);
}

TEST(Replications, AverageRewardRuns) {
  const Harness s = two_state_setup(Discount::average());
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::dr_average, EstimatorId::naive_average};
  cfg.ns = {20};
  cfg.horizons = {200};
  cfg.alphas = {0.0};
  cfg.betas = {1.0};
  cfg.runs = 50;
  const auto r = run_replications(s.ctx, s.inputs, cfg);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].id, EstimatorId::dr_average);
  EXPECT_EQ(r[0].errored_runs, 0);
  EXPECT_LT(std::sqrt(r[0].bias_sq), 4.0 * std::sqrt(r[0].variance / 50.0) + 1e-3);
}

TEST(Csv, HeaderAndRows) {
  const Harness s = two_state_setup();
  ReplicationConfig cfg;
  cfg.estimators = {EstimatorId::val};
  cfg.ns = {3};
  cfg.horizons = {2};
  cfg.runs = 2;
  cfg.seed = 5;
  std::ostringstream out;
  write_csv(out, run_replications(s.ctx, s.inputs, cfg));
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, kCsvHeader);
  EXPECT_EQ(row.rfind("VAL,3,2,0.9,1,1,2,", 0), 0u) << row;
  EXPECT_EQ(row.substr(row.size() - 4), ",0,5");
}

}  // namespace
}  // namespace drope
