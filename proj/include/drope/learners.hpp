#pragma once

// Model-based (count) estimates of V^pi and d_pi, input mixing, and weighted
// transition sets shared by the minimax learners.

#include <cmath>
#include <vector>

#include "drope/errors.hpp"
#include "drope/mdp.hpp"
#include "drope/simulate.hpp"

namespace drope {

/// Count-normalized model. Rows of unvisited (s, a) pairs are all zero.
struct EmpiricalModel {
  std::vector<Matrix> transition;
  Matrix reward;
  Matrix counts;
  Vector initial_dist;
  /// state appears as the current state of some transition
  std::vector<bool> visited;
};

inline EmpiricalModel build_empirical_model(const TrajectoryBatch& batch, const InitialSample& initial,
                                            int num_states, int num_actions) {
  EmpiricalModel m;
  m.transition.assign(num_actions, Matrix::Zero(num_states, num_states));
  m.reward = Matrix::Zero(num_states, num_actions);
  m.counts = Matrix::Zero(num_states, num_actions);
  m.initial_dist = Vector::Zero(num_states);
  m.visited.assign(num_states, false);
  for (const auto& traj : batch.trajectories) {
    for (const Transition& tr : traj) {
      if (tr.state >= num_states || tr.next_state >= num_states || tr.action >= num_actions) {
        throw shape_error("shape mismatch: transition index outside the model");
      }
      m.transition[tr.action](tr.state, tr.next_state) += 1.0;
      m.reward(tr.state, tr.action) += tr.reward;
      m.counts(tr.state, tr.action) += 1.0;
      m.visited[tr.state] = true;
    }
  }
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      const double c = m.counts(s, a);
      if (c > 0.0) {
        m.transition[a].row(s) /= c;
        m.reward(s, a) /= c;
      }
    }
  }
  for (int s : initial.states) m.initial_dist[s] += 1.0;
  if (!initial.states.empty()) m.initial_dist /= static_cast<double>(initial.size());
  return m;
}

/// Normalized empirical discounted visitation: sum gamma^t 1[s_t = s] / sum gamma^t.
inline Vector empirical_visitation(const TrajectoryBatch& batch, const Discount& disc, int num_states) {
  Vector d = Vector::Zero(num_states);
  double total = 0.0;
  for (const auto& traj : batch.trajectories) {
    double g = 1.0;
    for (const Transition& tr : traj) {
      d[tr.state] += g;
      total += g;
      g *= disc.gamma();
    }
  }
  if (total > 0.0) d /= total;
  return d;
}

struct ModelBasedFit {
  StateFunction v_hat;
  StateFunction rho_hat;
  StateFunction w_hat;
  EmpiricalModel model;
};

/**
 * Plug-in estimates from the empirical model:
 *   V(s) = sum_a pi(a|s) Q(s,a),  Q(s,a) = r(s,a) + gamma sum_s' T(s'|s,a) V(s')
 *   rho(s') = (1-gamma) d0(s') + gamma sum_{s,a} T(s'|s,a) pi(a|s) rho(s)
 * Unobserved (s, a) pairs contribute Q = 0, unvisited states get V = rho = 0,
 * rho is rescaled to sum to one, and w = rho / d_hat_pi0 with d_hat_pi0 the
 * empirical discounted visitation of the batch (0 where unvisited).
 */
inline ModelBasedFit fit_model_based(const TrajectoryBatch& batch, const InitialSample& initial,
                                     const Policy& target, const Discount& disc, int num_states,
                                     int num_actions) {
  if (batch.size() == 0) throw std::invalid_argument("fit_model_based: empty batch");
  if (disc.is_average()) throw std::invalid_argument("fit_model_based requires a discount factor below 1");
  if (target.num_states() != num_states || target.num_actions() != num_actions) {
    throw shape_error("shape mismatch: target policy");
  }
  ModelBasedFit fit;
  fit.model = build_empirical_model(batch, initial, num_states, num_actions);
  const EmpiricalModel& m = fit.model;
  const double gamma = disc.gamma();

  // sub-stochastic kernel: rows of unobserved pairs carry no mass
  Matrix p = Matrix::Zero(num_states, num_states);
  for (int a = 0; a < num_actions; ++a) p.noalias() += target.probs.col(a).asDiagonal() * m.transition[a];
  const Vector r = (target.probs.array() * m.reward.array()).rowwise().sum();

  SolverOptions opt;
  Vector v = detail::solve_discounted(p, gamma, r, opt, "fit_model_based value");
  Vector rho = detail::solve_discounted(p.transpose(), gamma, (1.0 - gamma) * m.initial_dist, opt,
                                        "fit_model_based density");
  for (int s = 0; s < num_states; ++s) {
    if (!m.visited[s]) {
      v[s] = 0.0;
      rho[s] = 0.0;
    }
  }
  rho = rho.cwiseMax(0.0);
  const double mass = rho.sum();
  if (mass > 0.0) rho /= mass;

  const Vector d0 = empirical_visitation(batch, disc, num_states);
  Vector w = Vector::Zero(num_states);
  for (int s = 0; s < num_states; ++s) {
    if (d0[s] > 0.0) w[s] = rho[s] / d0[s];
  }
  fit.v_hat = StateFunction(std::move(v), Role::value);
  fit.rho_hat = StateFunction(std::move(rho), Role::density);
  fit.w_hat = StateFunction(std::move(w), Role::density_ratio);
  return fit;
}

namespace detail {

inline void check_coefficient(double c, const char* name) {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
}

inline bool is_normalized(const StateFunction& f) { return std::abs(f.sum() - 1.0) <= 1e-12; }

}  // namespace detail

/// alpha * v_bad + (1 - alpha) * v_good: alpha = 1 selects the rough input.
inline StateFunction mix_value(const StateFunction& v_good, const StateFunction& v_bad, double alpha) {
  detail::check_coefficient(alpha, "alpha");
  if (v_good.size() != v_bad.size()) throw shape_error("shape mismatch: mixed value functions");
  if (alpha == 0.0) return StateFunction(v_good.values, Role::value);
  if (alpha == 1.0) return StateFunction(v_bad.values, Role::value);
  return StateFunction(alpha * v_bad.values + (1.0 - alpha) * v_good.values, Role::value);
}

/// beta * rho_bad + (1 - beta) * rho_good; renormalized to unit mass when
/// both inputs are normalized densities.
inline StateFunction mix_density(const StateFunction& rho_good, const StateFunction& rho_bad, double beta) {
  detail::check_coefficient(beta, "beta");
  if (rho_good.size() != rho_bad.size()) throw shape_error("shape mismatch: mixed densities");
  if (beta == 0.0) return StateFunction(rho_good.values, rho_good.role);
  if (beta == 1.0) return StateFunction(rho_bad.values, rho_bad.role);
  StateFunction out(beta * rho_bad.values + (1.0 - beta) * rho_good.values, rho_good.role);
  if (detail::is_normalized(rho_good) && detail::is_normalized(rho_bad)) out.values /= out.sum();
  return out;
}

// ---------------------------------------------------------------------------
// Weighted transition sets
// ---------------------------------------------------------------------------

struct WeightedTransition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  double weight = 0.0;
};

struct WeightedState {
  int state = 0;
  double weight = 0.0;
};

/**
 * Transitions (s, a, r, s') with probability weights, plus weighted initial
 * states. Built either from a sampled batch (weights proportional to gamma^t,
 * initial states uniform) or by exact enumeration under the model, in which
 * case `exact` is set and minibatch expectations become exact sums.
 */
struct TransitionSet {
  std::vector<WeightedTransition> transitions;
  std::vector<WeightedState> initial;
  bool exact = false;

  std::size_t support_size() const {
    std::size_t n = 0;
    for (const auto& t : transitions) n += t.weight > 0.0;
    return n;
  }
};

inline TransitionSet transition_set_from_batch(const TrajectoryBatch& batch, const InitialSample& initial,
                                               const Discount& disc) {
  TransitionSet set;
  set.transitions.reserve(static_cast<std::size_t>(batch.num_transitions()));
  double total = 0.0;
  for (const auto& traj : batch.trajectories) {
    double g = 1.0;
    for (const Transition& tr : traj) {
      set.transitions.push_back({tr.state, tr.action, tr.reward, tr.next_state, g});
      total += g;
      if (!disc.is_average()) g *= disc.gamma();
    }
  }
  for (auto& t : set.transitions) t.weight /= total;
  const double w0 = initial.states.empty() ? 0.0 : 1.0 / initial.size();
  for (int s : initial.states) set.initial.push_back({s, w0});
  return set;
}

/// All (s, a, s') with weight d_pi0(s) pi0(a|s) T(s'|s,a), zero weights
/// included, and initial states weighted by mu0.
inline TransitionSet population_mode_dataset(const TabularMDP& mdp, const Policy& target, const Policy& behavior,
                                             const Discount& disc) {
  detail::check_policy_shape(mdp, target);
  detail::check_policy_shape(mdp, behavior);
  const Vector d = exact_visitation(mdp, behavior, disc).values;
  TransitionSet set;
  set.exact = true;
  set.transitions.reserve(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        set.transitions.push_back(
            {s, a, mdp.reward(s, a), s2, d[s] * behavior(s, a) * mdp.prob(s, a, s2)});
      }
    }
  }
  for (int s = 0; s < mdp.num_states; ++s) set.initial.push_back({s, mdp.initial_dist[s]});
  return set;
}

}  // namespace drope
