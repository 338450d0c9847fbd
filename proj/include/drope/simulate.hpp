#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "drope/mdp.hpp"
#include "drope/rng.hpp"

namespace drope {

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  int time = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// n fixed-length trajectories generated under one behavior policy.
struct TrajectoryBatch {
  std::vector<std::vector<Transition>> trajectories;
  std::uint64_t seed = 0;

  int size() const noexcept { return static_cast<int>(trajectories.size()); }
  int horizon() const noexcept {
    return trajectories.empty() ? 0 : static_cast<int>(trajectories.front().size());
  }
  long num_transitions() const noexcept { return static_cast<long>(size()) * horizon(); }

  friend bool operator==(const TrajectoryBatch&, const TrajectoryBatch&) = default;
};

/// Independent draws from mu0.
struct InitialSample {
  std::vector<int> states;
  std::uint64_t seed = 0;

  int size() const noexcept { return static_cast<int>(states.size()); }
  friend bool operator==(const InitialSample&, const InitialSample&) = default;
};

/// First states of a batch, for callers that reuse them as the mu0 sample.
inline InitialSample initial_states_of(const TrajectoryBatch& batch) {
  InitialSample out;
  out.seed = batch.seed;
  out.states.reserve(batch.trajectories.size());
  for (const auto& traj : batch.trajectories) out.states.push_back(traj.front().state);
  return out;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// pi(a|s) proportional to exp(q(s,a) / tau).
inline Policy make_softmax_policy(const Matrix& q, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  if (!q.allFinite()) throw std::invalid_argument("softmax of a non-finite action-value table");
  Matrix p(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double top = q.row(s).maxCoeff();
    for (Eigen::Index a = 0; a < q.cols(); ++a) p(s, a) = std::exp((q(s, a) - top) / tau);
    p.row(s) /= p.row(s).sum();
  }
  Policy pi(std::move(p));
  pi.meta = SoftmaxRecord{q, tau};
  return pi;
}

/// Optimal action values by value iteration to a Bellman-optimality residual
/// below `tolerance`. Stands in for a learned Q-function when constructing
/// target/behavior policy pairs.
inline Matrix solve_optimal_q(const TabularMDP& mdp, const Discount& disc, double tolerance = 1e-10,
                              long max_iterations = 10'000'000) {
  if (disc.is_average()) throw std::invalid_argument("solve_optimal_q requires a discount factor below 1");
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> kernels;
  kernels.reserve(A);
  for (int a = 0; a < A; ++a) kernels.push_back(mdp.transition[a].sparseView());

  Matrix q = mdp.reward;
  Matrix next(S, A);
  for (long it = 0; it < max_iterations; ++it) {
    const Vector v = q.rowwise().maxCoeff();
    for (int a = 0; a < A; ++a) next.col(a) = mdp.reward.col(a) + disc.gamma() * (kernels[a] * v);
    const double residual = (next - q).lpNorm<Eigen::Infinity>();
    q.swap(next);
    if (residual < tolerance) return q;
  }
  throw convergence_error("solve_optimal_q: value iteration did not converge");
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Cumulative tables for fast categorical draws from mu0, pi and T.
/// Keeps a pointer to the MDP, which must outlive the sampler.
class TransitionSampler {
 public:
  TransitionSampler(const TabularMDP& mdp, const Policy& pi) : mdp_(&mdp), S_(mdp.num_states), A_(mdp.num_actions) {
    detail::check_policy_shape(mdp, pi);
    initial_.resize(S_);
    double acc = 0.0;
    for (int s = 0; s < S_; ++s) initial_[s] = (acc += mdp.initial_dist[s]);

    policy_.resize(static_cast<std::size_t>(S_) * A_);
    for (int s = 0; s < S_; ++s) {
      acc = 0.0;
      for (int a = 0; a < A_; ++a) policy_[s * A_ + a] = (acc += pi(s, a));
    }

    rows_.resize(static_cast<std::size_t>(S_) * A_);
    for (int s = 0; s < S_; ++s) {
      for (int a = 0; a < A_; ++a) {
        Row& row = rows_[s * A_ + a];
        acc = 0.0;
        for (int s2 = 0; s2 < S_; ++s2) {
          const double p = mdp.prob(s, a, s2);
          if (p > 0.0) {
            row.next.push_back(s2);
            row.cumulative.push_back(acc += p);
          }
        }
        if (row.next.empty()) {
          throw std::invalid_argument("transition row without support at s=" + std::to_string(s) +
                                      " a=" + std::to_string(a));
        }
      }
    }
  }

  int initial_state(Rng& rng) const { return rng.categorical(initial_); }

  int action(int s, Rng& rng) const {
    return rng.categorical(std::span<const double>(policy_.data() + s * A_, A_));
  }

  int next_state(int s, int a, Rng& rng) const {
    const Row& row = rows_[s * A_ + a];
    return row.next[rng.categorical(row.cumulative)];
  }

  std::vector<Transition> trajectory(int horizon, Rng& rng) const {
    std::vector<Transition> out(horizon);
    int s = initial_state(rng);
    for (int t = 0; t < horizon; ++t) {
      const int a = action(s, rng);
      const int s2 = next_state(s, a, rng);
      out[t] = Transition{s, a, mdp_->reward(s, a), s2, t};
      s = s2;
    }
    return out;
  }

 private:
  struct Row {
    std::vector<int> next;
    std::vector<double> cumulative;
  };
  const TabularMDP* mdp_;
  int S_;
  int A_;
  std::vector<double> initial_;
  std::vector<double> policy_;
  std::vector<Row> rows_;
};

/// n trajectories of length T under pi0. Trajectory i uses the child stream
/// derive_seed(seed, i), so the batch does not depend on generation order.
inline TrajectoryBatch sample_trajectories(const TransitionSampler& sampler, int n, int horizon,
                                           std::uint64_t seed) {
  if (n < 1 || horizon < 1) throw std::invalid_argument("sample_trajectories needs n >= 1 and T >= 1");
  TrajectoryBatch batch;
  batch.seed = seed;
  batch.trajectories.reserve(n);
  const Rng root(seed);
  for (int i = 0; i < n; ++i) {
    Rng rng = root.child(static_cast<std::uint64_t>(i));
    batch.trajectories.push_back(sampler.trajectory(horizon, rng));
  }
  return batch;
}

inline TrajectoryBatch sample_trajectories(const TabularMDP& mdp, const Policy& pi0, int n, int horizon,
                                           std::uint64_t seed) {
  return sample_trajectories(TransitionSampler(mdp, pi0), n, horizon, seed);
}

inline InitialSample sample_initial(const TabularMDP& mdp, int n0, std::uint64_t seed) {
  if (n0 < 1) throw std::invalid_argument("sample_initial needs n0 >= 1");
  std::vector<double> cumulative(mdp.num_states);
  double acc = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) cumulative[s] = (acc += mdp.initial_dist[s]);
  InitialSample out;
  out.seed = seed;
  out.states.reserve(n0);
  Rng rng(seed);
  for (int i = 0; i < n0; ++i) out.states.push_back(rng.categorical(cumulative));
  return out;
}

}  // namespace drope
