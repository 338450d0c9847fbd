#pragma once

// Sample-based estimators of R^pi from behavior data.
//
// All discounted estimators weight time step t by gamma^t. Every stored
// transition carries its successor state, so the bridge term runs over the
// same index set t = 0..T-1 as the importance-sampling term.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drope/errors.hpp"
#include "drope/mdp.hpp"
#include "drope/simulate.hpp"

namespace drope {

enum class Normalization { self_normalized, constant };

enum class EstimatorId { val, sis, conn, dr, dr_average, onpolicy_mc, naive_average, trajectory_is };

inline std::string_view estimator_name(EstimatorId id) {
  switch (id) {
    case EstimatorId::val: return "VAL";
    case EstimatorId::sis: return "SIS";
    case EstimatorId::conn: return "CONN";
    case EstimatorId::dr: return "DR";
    case EstimatorId::dr_average: return "DR_AVG";
    case EstimatorId::onpolicy_mc: return "MC";
    case EstimatorId::naive_average: return "NAIVE";
    case EstimatorId::trajectory_is: return "TIS";
  }
  return "?";
}

inline std::optional<EstimatorId> parse_estimator(std::string_view name) {
  for (EstimatorId id : {EstimatorId::val, EstimatorId::sis, EstimatorId::conn, EstimatorId::dr,
                         EstimatorId::dr_average, EstimatorId::onpolicy_mc, EstimatorId::naive_average,
                         EstimatorId::trajectory_is}) {
    if (estimator_name(id) == name) return id;
  }
  return std::nullopt;
}

inline std::string_view normalization_name(Normalization m) {
  return m == Normalization::self_normalized ? "self_normalized" : "constant";
}

/// Normalizers actually divided by: Z for SIS, Z1/Z2 for the bridge term.
struct Normalizers {
  double z = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
};

struct Estimate {
  double value = 0.0;
  EstimatorId id = EstimatorId::val;
  Normalizers normalizers;
  Normalization mode = Normalization::self_normalized;
};

/// pi(a|s) / pi0(a|s); throws when pi puts mass where pi0 has none.
inline double importance_ratio(const Policy& target, const Policy& behavior, int s, int a) {
  const double p0 = behavior(s, a);
  const double p = target(s, a);
  if (p0 > 0.0) return p / p0;
  if (p > 0.0) {
    throw coverage_error("behavior policy has no coverage of action " + std::to_string(a) +
                         " at state " + std::to_string(s));
  }
  return 0.0;
}

namespace detail {

inline void require_discounted(const Discount& disc, const char* who) {
  if (disc.is_average()) throw std::invalid_argument(std::string(who) + " requires a discount factor below 1");
}

inline void require_nonempty(const TrajectoryBatch& batch, const char* who) {
  if (batch.size() == 0 || batch.horizon() == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
}

inline void check_batch_shapes(const TrajectoryBatch& batch, const Policy& target, const Policy& behavior,
                               int num_states) {
  require(target.num_states() == behavior.num_states() && target.num_actions() == behavior.num_actions(),
          "target and behavior policies differ in shape");
  require(target.num_states() == num_states, "state function and policies differ in state count");
  for (const auto& traj : batch.trajectories) {
    for (const Transition& tr : traj) {
      if (tr.state >= num_states || tr.next_state >= num_states || tr.action >= target.num_actions()) {
        throw shape_error("shape mismatch: transition index outside the model");
      }
    }
  }
}

/// sum_{t<T} gamma^t
inline double discount_mass(double gamma, int horizon) {
  double total = 0.0;
  double g = 1.0;
  for (int t = 0; t < horizon; ++t) {
    total += g;
    g *= gamma;
  }
  return total;
}

inline std::vector<double> discount_powers(double gamma, int count) {
  std::vector<double> out(count);
  double g = 1.0;
  for (int t = 0; t < count; ++t) {
    out[t] = g;
    g *= gamma;
  }
  return out;
}

}  // namespace detail

/// (1-gamma)/n0 * sum_i V(s0_i).
inline Estimate estimate_val(const StateFunction& v_hat, const InitialSample& initial, const Discount& disc) {
  detail::require_discounted(disc, "estimate_val");
  if (initial.states.empty()) throw std::invalid_argument("estimate_val: empty initial sample");
  double total = 0.0;
  for (int s : initial.states) {
    if (s < 0 || s >= v_hat.size()) throw shape_error("shape mismatch: initial state outside the model");
    total += v_hat[s];
  }
  Estimate e;
  e.id = EstimatorId::val;
  e.value = (1.0 - disc.gamma()) * total / static_cast<double>(initial.size());
  return e;
}

/// Stationary-ratio importance sampling. Self-normalized: divide by
/// Z = sum gamma^t w(s) beta(a|s); constant: divide by n sum_{t<T} gamma^t.
inline Estimate estimate_sis(const StateFunction& w_hat, const TrajectoryBatch& batch, const Policy& target,
                             const Policy& behavior, const Discount& disc, Normalization mode) {
  detail::require_discounted(disc, "estimate_sis");
  detail::require_nonempty(batch, "estimate_sis");
  detail::check_batch_shapes(batch, target, behavior, w_hat.size());
  const auto powers = detail::discount_powers(disc.gamma(), batch.horizon());
  double numerator = 0.0;
  double z = 0.0;
  for (const auto& traj : batch.trajectories) {
    for (const Transition& tr : traj) {
      const double weight = powers[tr.time] * w_hat[tr.state] * importance_ratio(target, behavior, tr.state, tr.action);
      numerator += weight * tr.reward;
      z += weight;
    }
  }
  Estimate e;
  e.id = EstimatorId::sis;
  e.mode = mode;
  if (mode == Normalization::constant) {
    z = batch.size() * detail::discount_mass(disc.gamma(), batch.horizon());
  } else if (z == 0.0) {
    throw degenerate_weights_error("degenerate importance weights: Z = 0");
  }
  e.normalizers.z = z;
  e.value = numerator / z;
  return e;
}

/// Bridge term: sum gamma^t w V(s_t) / Z1 - sum gamma^{t+1} w beta V(s_{t+1}) / Z2.
/// Z2 normalizes the weights gamma^t w beta (not gamma^{t+1} w beta), so the
/// second term estimates gamma * E[w P^pi V] and the population limit is
/// sum_s (V - gamma P^pi V)(s) d_pi0(s) w(s).
inline Estimate estimate_conn(const StateFunction& v_hat, const StateFunction& w_hat, const TrajectoryBatch& batch,
                              const Policy& target, const Policy& behavior, const Discount& disc,
                              Normalization mode) {
  detail::require_discounted(disc, "estimate_conn");
  detail::require_nonempty(batch, "estimate_conn");
  if (v_hat.size() != w_hat.size()) throw shape_error("shape mismatch: value and ratio functions");
  detail::check_batch_shapes(batch, target, behavior, w_hat.size());
  const double gamma = disc.gamma();
  const auto powers = detail::discount_powers(gamma, batch.horizon());
  double first = 0.0;
  double second = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
  for (const auto& traj : batch.trajectories) {
    for (const Transition& tr : traj) {
      const double w = powers[tr.time] * w_hat[tr.state];
      const double wb = w * importance_ratio(target, behavior, tr.state, tr.action);
      first += w * v_hat[tr.state];
      second += gamma * wb * v_hat[tr.next_state];
      z1 += w;
      z2 += wb;
    }
  }
  Estimate e;
  e.id = EstimatorId::conn;
  e.mode = mode;
  if (mode == Normalization::constant) {
    z1 = z2 = batch.size() * detail::discount_mass(gamma, batch.horizon());
  } else if (z1 == 0.0 || z2 == 0.0) {
    throw degenerate_weights_error("degenerate importance weights: Z1 or Z2 = 0");
  }
  e.normalizers.z1 = z1;
  e.normalizers.z2 = z2;
  e.value = first / z1 - second / z2;
  return e;
}

/// Doubly robust estimate SIS + VAL - CONN with its three parts.
struct DoublyRobustParts {
  Estimate sis;
  Estimate val;
  Estimate conn;
  Estimate dr;
};

inline DoublyRobustParts estimate_dr_parts(const StateFunction& v_hat, const StateFunction& w_hat,
                                           const TrajectoryBatch& batch, const InitialSample& initial,
                                           const Policy& target, const Policy& behavior, const Discount& disc,
                                           Normalization mode) {
  DoublyRobustParts p;
  p.sis = estimate_sis(w_hat, batch, target, behavior, disc, mode);
  p.val = estimate_val(v_hat, initial, disc);
  p.conn = estimate_conn(v_hat, w_hat, batch, target, behavior, disc, mode);
  p.dr.id = EstimatorId::dr;
  p.dr.mode = mode;
  p.dr.normalizers = {p.sis.normalizers.z, p.conn.normalizers.z1, p.conn.normalizers.z2};
  p.dr.value = p.sis.value + p.val.value - p.conn.value;
  return p;
}

inline Estimate estimate_dr(const StateFunction& v_hat, const StateFunction& w_hat, const TrajectoryBatch& batch,
                            const InitialSample& initial, const Policy& target, const Policy& behavior,
                            const Discount& disc, Normalization mode) {
  return estimate_dr_parts(v_hat, w_hat, batch, initial, target, behavior, disc, mode).dr;
}

/// Average-reward doubly robust estimate
/// sum w(s) (beta (r + V(s')) - V(s)) / sum w(s), unit weight per transition.
inline Estimate estimate_dr_average(const StateFunction& v_hat, const StateFunction& w_hat,
                                    const TrajectoryBatch& batch, const Policy& target, const Policy& behavior) {
  detail::require_nonempty(batch, "estimate_dr_average");
  if (v_hat.size() != w_hat.size()) throw shape_error("shape mismatch: value and ratio functions");
  detail::check_batch_shapes(batch, target, behavior, w_hat.size());
  double numerator = 0.0;
  double z = 0.0;
  for (const auto& traj : batch.trajectories) {
    for (const Transition& tr : traj) {
      const double w = w_hat[tr.state];
      const double beta = importance_ratio(target, behavior, tr.state, tr.action);
      numerator += w * (beta * (tr.reward + v_hat[tr.next_state]) - v_hat[tr.state]);
      z += w;
    }
  }
  if (z == 0.0) throw degenerate_weights_error("degenerate importance weights: sum of w = 0");
  Estimate e;
  e.id = EstimatorId::dr_average;
  e.mode = Normalization::self_normalized;
  e.normalizers.z = z;
  e.value = numerator / z;
  return e;
}

namespace detail {

inline double discounted_reward_average(const TrajectoryBatch& batch, const Discount& disc, const char* who) {
  require_nonempty(batch, who);
  const auto powers = discount_powers(disc.gamma(), batch.horizon());
  double total = 0.0;
  for (const auto& traj : batch.trajectories) {
    for (const Transition& tr : traj) total += powers[tr.time] * tr.reward;
  }
  return total / (batch.size() * discount_mass(disc.gamma(), batch.horizon()));
}

}  // namespace detail

/// sum_i sum_t gamma^t r_t / (n sum_t gamma^t) on data from the target policy.
inline Estimate estimate_onpolicy_mc(const TrajectoryBatch& batch_from_target, const Discount& disc) {
  Estimate e;
  e.id = EstimatorId::onpolicy_mc;
  e.mode = Normalization::constant;
  e.value = detail::discounted_reward_average(batch_from_target, disc, "estimate_onpolicy_mc");
  return e;
}

/// The same average applied to behavior data; estimates R^{pi0}, not R^pi.
inline Estimate estimate_naive_average(const TrajectoryBatch& batch, const Discount& disc) {
  Estimate e;
  e.id = EstimatorId::naive_average;
  e.mode = Normalization::constant;
  e.value = detail::discounted_reward_average(batch, disc, "estimate_naive_average");
  return e;
}

/// Step-wise trajectory importance sampling with cumulative ratio products
/// (accumulated in log space). Plain: divide by n sum gamma^t. Self-normalized:
/// normalize the products across trajectories at every step.
inline Estimate estimate_trajectory_is(const TrajectoryBatch& batch, const Policy& target, const Policy& behavior,
                                       const Discount& disc, bool self_normalize) {
  detail::require_nonempty(batch, "estimate_trajectory_is");
  detail::check_batch_shapes(batch, target, behavior, target.num_states());
  const int n = batch.size();
  const int T = batch.horizon();
  const auto powers = detail::discount_powers(disc.gamma(), T);
  std::vector<double> step_numerator(T, 0.0);
  std::vector<double> step_mass(T, 0.0);
  for (int i = 0; i < n; ++i) {
    double log_rho = 0.0;
    for (const Transition& tr : batch.trajectories[i]) {
      const double beta = importance_ratio(target, behavior, tr.state, tr.action);
      log_rho += beta > 0.0 ? std::log(beta) : -std::numeric_limits<double>::infinity();
      const double rho = std::exp(log_rho);
      step_numerator[tr.time] += rho * tr.reward;
      step_mass[tr.time] += rho;
    }
  }
  double value = 0.0;
  if (self_normalize) {
    for (int t = 0; t < T; ++t) {
      if (step_mass[t] == 0.0) throw degenerate_weights_error("degenerate importance weights at step " + std::to_string(t));
      value += powers[t] * step_numerator[t] / step_mass[t];
    }
    value /= detail::discount_mass(disc.gamma(), T);
  } else {
    for (int t = 0; t < T; ++t) value += powers[t] * step_numerator[t];
    value /= n * detail::discount_mass(disc.gamma(), T);
  }
  Estimate e;
  e.id = EstimatorId::trajectory_is;
  e.mode = self_normalize ? Normalization::self_normalized : Normalization::constant;
  e.value = value;
  return e;
}

}  // namespace drope
