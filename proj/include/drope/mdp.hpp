#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "drope/errors.hpp"

namespace drope {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochasticTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Discount
// ---------------------------------------------------------------------------

/// Either a discount factor in (0,1) or the average-reward (gamma = 1) mode.
class Discount {
 public:
  static Discount discounted(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw std::invalid_argument("discount factor must lie in (0,1), got " + std::to_string(gamma));
    }
    return Discount(gamma, false);
  }
  static Discount average() { return Discount(1.0, true); }

  bool is_average() const noexcept { return average_; }
  /// 1 in average-reward mode.
  double gamma() const noexcept { return gamma_; }

  friend bool operator==(const Discount&, const Discount&) = default;

 private:
  Discount(double g, bool avg) : gamma_(g), average_(avg) {}
  double gamma_;
  bool average_;
};

// ---------------------------------------------------------------------------
// StateFunction
// ---------------------------------------------------------------------------

enum class Role { value, reward_avg, density, density_ratio, test_fn };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::value: return "value";
    case Role::reward_avg: return "reward_avg";
    case Role::density: return "density";
    case Role::density_ratio: return "density_ratio";
    case Role::test_fn: return "test_fn";
  }
  return "value";
}

inline std::optional<Role> parse_role(std::string_view name) {
  for (Role r : {Role::value, Role::reward_avg, Role::density, Role::density_ratio, Role::test_fn}) {
    if (role_name(r) == name) return r;
  }
  return std::nullopt;
}

/// A real function over the (finite) state space. Carries V, r^pi, d_pi,
/// density ratios and test functions alike; the role records which.
struct StateFunction {
  Vector values;
  Role role = Role::value;

  StateFunction() = default;
  StateFunction(Vector v, Role r) : values(std::move(v)), role(r) {}

  static StateFunction constant(int num_states, double c, Role r) {
    return StateFunction(Vector::Constant(num_states, c), r);
  }

  int size() const noexcept { return static_cast<int>(values.size()); }
  double operator[](int s) const { return values[s]; }
  double& operator[](int s) { return values[s]; }
  double sum() const { return values.sum(); }
};

// ---------------------------------------------------------------------------
// TabularMDP and Policy
// ---------------------------------------------------------------------------

/**
 * Finite MDP. States and actions are dense 0-based indices.
 * `transition[a](s, s2)` is T(s2 | s, a); `reward(s, a)` is r(s, a).
 */
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Matrix> transition;
  Matrix reward;
  Vector initial_dist;

  static TabularMDP zeros(int num_states, int num_actions) {
    if (num_states <= 0 || num_actions <= 0) {
      throw std::invalid_argument("an MDP needs at least one state and one action");
    }
    TabularMDP m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.transition.assign(num_actions, Matrix::Zero(num_states, num_states));
    m.reward = Matrix::Zero(num_states, num_actions);
    m.initial_dist = Vector::Zero(num_states);
    return m;
  }

  double prob(int s, int a, int next) const { return transition[a](s, next); }
  double& prob(int s, int a, int next) { return transition[a](s, next); }
};

struct SoftmaxRecord {
  Matrix q;
  double tau = 1.0;
};

/// Stochastic state -> action table, pi(a|s) = probs(s, a).
struct Policy {
  Matrix probs;
  std::optional<SoftmaxRecord> meta;

  Policy() = default;
  explicit Policy(Matrix p) : probs(std::move(p)) {}

  static Policy uniform(int num_states, int num_actions) {
    return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
  }

  int num_states() const noexcept { return static_cast<int>(probs.rows()); }
  int num_actions() const noexcept { return static_cast<int>(probs.cols()); }
  double operator()(int s, int a) const { return probs(s, a); }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw shape_error("shape mismatch: " + what);
}

inline void check_policy_shape(const TabularMDP& mdp, const Policy& pi) {
  require(pi.num_states() == mdp.num_states && pi.num_actions() == mdp.num_actions,
          "policy is " + std::to_string(pi.num_states()) + "x" + std::to_string(pi.num_actions()) +
              ", MDP is " + std::to_string(mdp.num_states) + "x" + std::to_string(mdp.num_actions));
}

inline void check_function_shape(const TabularMDP& mdp, const Vector& f) {
  require(f.size() == mdp.num_states, "state function has " + std::to_string(f.size()) +
                                          " entries, MDP has " + std::to_string(mdp.num_states) +
                                          " states");
}

}  // namespace detail

/// Lists every violated model invariant; empty means the model is valid.
inline std::vector<std::string> validate_mdp(const TabularMDP& mdp) {
  std::vector<std::string> out;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if (S <= 0 || A <= 0) {
    out.emplace_back("empty state or action space");
    return out;
  }
  if (static_cast<int>(mdp.transition.size()) != A || mdp.reward.rows() != S ||
      mdp.reward.cols() != A || mdp.initial_dist.size() != S) {
    out.emplace_back("shape mismatch");
    return out;
  }
  for (int a = 0; a < A; ++a) {
    if (mdp.transition[a].rows() != S || mdp.transition[a].cols() != S) {
      out.emplace_back("shape mismatch: transition slice for action " + std::to_string(a));
      return out;
    }
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const auto row = mdp.transition[a].row(s);
      if ((row.array() < 0.0).any() || !row.allFinite()) {
        out.push_back("transition negative at s=" + std::to_string(s) + " a=" + std::to_string(a));
      }
      const double total = row.sum();
      if (std::abs(total - 1.0) > kStochasticTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "row not stochastic at s=" << s << " a=" << a << " (sum " << total << ")";
        out.push_back(msg.str());
      }
      if (!std::isfinite(mdp.reward(s, a))) {
        out.push_back("reward not finite at s=" + std::to_string(s) + " a=" + std::to_string(a));
      }
    }
  }
  if ((mdp.initial_dist.array() < 0.0).any()) out.emplace_back("initial_dist negative");
  if (std::abs(mdp.initial_dist.sum() - 1.0) > kStochasticTolerance) {
    out.emplace_back("initial_dist not normalized");
  }
  return out;
}

inline std::vector<std::string> validate_policy(const Policy& pi) {
  std::vector<std::string> out;
  for (int s = 0; s < pi.num_states(); ++s) {
    const auto row = pi.probs.row(s);
    if ((row.array() < 0.0).any()) out.push_back("policy negative at s=" + std::to_string(s));
    if (std::abs(row.sum() - 1.0) > kStochasticTolerance) {
      out.push_back("policy row not stochastic at s=" + std::to_string(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// r^pi(s) = sum_a pi(a|s) r(s,a).
inline StateFunction policy_reward(const TabularMDP& mdp, const Policy& pi) {
  detail::check_policy_shape(mdp, pi);
  Vector r = (pi.probs.array() * mdp.reward.array()).rowwise().sum();
  return StateFunction(std::move(r), Role::reward_avg);
}

/// State-to-state kernel P(s, s') = sum_a pi(a|s) T(s'|s,a).
inline Matrix transition_matrix(const TabularMDP& mdp, const Policy& pi) {
  detail::check_policy_shape(mdp, pi);
  Matrix p = Matrix::Zero(mdp.num_states, mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a) {
    p.noalias() += pi.probs.col(a).asDiagonal() * mdp.transition[a];
  }
  return p;
}

/// (P^pi f)(s) = sum_{s',a} T(s'|s,a) pi(a|s) f(s'): expected next value.
inline StateFunction apply_P(const TabularMDP& mdp, const Policy& pi, const StateFunction& f) {
  detail::check_policy_shape(mdp, pi);
  detail::check_function_shape(mdp, f.values);
  Vector out = Vector::Zero(mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double p = pi(s, a);
      if (p == 0.0) continue;
      acc += p * mdp.transition[a].row(s).dot(f.values);
    }
    out[s] = acc;
  }
  return StateFunction(std::move(out), f.role);
}

/// (T^pi g)(s') = sum_{s,a} T(s'|s,a) pi(a|s) g(s): one step of mass transport.
inline StateFunction apply_T(const TabularMDP& mdp, const Policy& pi, const StateFunction& g) {
  detail::check_policy_shape(mdp, pi);
  detail::check_function_shape(mdp, g.values);
  Vector out = Vector::Zero(mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a) {
    const Vector mass = pi.probs.col(a).cwiseProduct(g.values);
    out.noalias() += mdp.transition[a].transpose() * mass;
  }
  return StateFunction(std::move(out), g.role);
}

// ---------------------------------------------------------------------------
// Exact solvers
// ---------------------------------------------------------------------------

struct SolverOptions {
  /// Dense LU up to this many states, fixed-point iteration beyond.
  int dense_limit = 4000;
  double iteration_tolerance = 1e-12;
  long max_iterations = 10'000'000;
};

namespace detail {

/// Solves (I - gamma * M) x = b, M row-stochastic or its transpose.
inline Vector solve_discounted(const Matrix& m, double gamma, const Vector& b,
                               const SolverOptions& opt, const char* what) {
  const auto n = m.rows();
  if (n <= opt.dense_limit) {
    const Matrix a = Matrix::Identity(n, n) - gamma * m;
    Eigen::PartialPivLU<Matrix> lu(a);
    Vector x = lu.solve(b);
    // one step of iterative refinement keeps residuals at round-off level
    // even when gamma is close to 1
    const Vector r = b - a * x;
    x += lu.solve(r);
    return x;
  }
  Vector x = b;
  for (long it = 0; it < opt.max_iterations; ++it) {
    Vector next = b + gamma * (m * x);
    const double change = (next - x).lpNorm<Eigen::Infinity>();
    x.swap(next);
    if (change < opt.iteration_tolerance) return x;
  }
  throw convergence_error(std::string(what) + ": fixed-point iteration did not converge");
}

}  // namespace detail

/// V^pi, the fixed point of V = r^pi + gamma P^pi V (discounted mode only).
inline StateFunction exact_value(const TabularMDP& mdp, const Policy& pi, const Discount& disc,
                                 const SolverOptions& opt = {}) {
  if (disc.is_average()) {
    throw std::invalid_argument("exact_value requires a discount factor below 1");
  }
  const Vector r = policy_reward(mdp, pi).values;
  const Matrix p = transition_matrix(mdp, pi);
  Vector v = detail::solve_discounted(p, disc.gamma(), r, opt, "exact_value");
  return StateFunction(std::move(v), Role::value);
}

/// Stationary distribution of P^pi by power iteration.
inline Vector stationary_distribution(const Matrix& p, double tolerance = 1e-12,
                                      long max_iterations = 1'000'000) {
  const auto n = p.rows();
  const Matrix pt = p.transpose();
  Vector rho = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (long it = 0; it < max_iterations; ++it) {
    Vector next = pt * rho;
    next /= next.sum();
    const double residual = (next - rho).lpNorm<Eigen::Infinity>();
    rho.swap(next);
    if (residual < tolerance) return rho;
  }
  throw convergence_error("no unique stationary distribution reached");
}

/// Normalized discounted visitation d_pi, or the stationary distribution in
/// average-reward mode.
inline StateFunction exact_visitation(const TabularMDP& mdp, const Policy& pi,
                                      const Discount& disc, const SolverOptions& opt = {}) {
  const Matrix p = transition_matrix(mdp, pi);
  Vector d;
  if (disc.is_average()) {
    d = stationary_distribution(p);
  } else {
    const Vector b = (1.0 - disc.gamma()) * mdp.initial_dist;
    d = detail::solve_discounted(p.transpose(), disc.gamma(), b, opt, "exact_visitation");
  }
  // round-off can leave entries of unreachable states at -1e-18
  d = d.cwiseMax(0.0);
  return StateFunction(std::move(d), Role::density);
}

/// Differential value of the average-reward Bellman equation
/// V = r^pi - R^pi + P^pi V, pinned by sum_s rho(s) V(s) = 0.
inline StateFunction exact_differential_value(const TabularMDP& mdp, const Policy& pi) {
  const Matrix p = transition_matrix(mdp, pi);
  const Vector rho = stationary_distribution(p);
  const Vector r = policy_reward(mdp, pi).values;
  const double avg = rho.dot(r);
  const auto n = p.rows();
  const Matrix a = Matrix::Identity(n, n) - p + Vector::Ones(n) * rho.transpose();
  const Vector b = r - Vector::Constant(n, avg);
  Eigen::PartialPivLU<Matrix> lu(a);
  Vector v = lu.solve(b);
  v += lu.solve(b - a * v);
  return StateFunction(std::move(v), Role::value);
}

inline constexpr double kRewardAgreementTolerance = 1e-9;

/// R^pi. In discounted mode it is computed as (1-gamma) E_mu0[V^pi] and as
/// E_{d_pi}[r^pi]; the two must agree, and the density form is returned.
inline double exact_reward(const TabularMDP& mdp, const Policy& pi, const Discount& disc,
                           const SolverOptions& opt = {}) {
  const Vector r = policy_reward(mdp, pi).values;
  const Vector d = exact_visitation(mdp, pi, disc, opt).values;
  const double density_form = d.dot(r);
  if (disc.is_average()) return density_form;
  const Vector v = exact_value(mdp, pi, disc, opt).values;
  const double value_form = (1.0 - disc.gamma()) * mdp.initial_dist.dot(v);
  if (std::abs(value_form - density_form) > kRewardAgreementTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "value form " << value_form << " and density form " << density_form
        << " of R^pi disagree";
    throw oracle_error(msg.str());
  }
  return density_form;
}

/// Entrywise d_pi / d_pi0 with 0/0 := 0.
inline StateFunction density_ratio(const Vector& d_target, const Vector& d_behavior) {
  if (d_target.size() != d_behavior.size()) throw shape_error("shape mismatch: density vectors");
  Vector w = Vector::Zero(d_target.size());
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    if (d_behavior[s] > 0.0) {
      w[s] = d_target[s] / d_behavior[s];
    } else if (d_target[s] > 0.0) {
      throw coverage_error("behavior policy has no coverage at state " + std::to_string(s));
    }
  }
  return StateFunction(std::move(w), Role::density_ratio);
}

inline StateFunction exact_density_ratio(const TabularMDP& mdp, const Policy& pi,
                                         const Policy& pi0, const Discount& disc,
                                         const SolverOptions& opt = {}) {
  return density_ratio(exact_visitation(mdp, pi, disc, opt).values,
                       exact_visitation(mdp, pi0, disc, opt).values);
}

}  // namespace drope
