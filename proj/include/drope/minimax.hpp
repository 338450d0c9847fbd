#pragma once

// Two-timescale minimax learners for the density ratio and the value
// function, over small parametric families with analytic gradients.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "drope/errors.hpp"
#include "drope/estimators.hpp"
#include "drope/learners.hpp"
#include "drope/mdp.hpp"
#include "drope/rng.hpp"

namespace drope {

enum class OutputTransform { identity, softplus };

/**
 * A differentiable map from states to reals.
 *   tabular:    out(s) = g(theta_s)
 *   linear:     out(s) = g(phi(s) . theta)
 *   perceptron: out(s) = g(w2 . tanh(W1 phi(s) + b1) + b2)
 * with g the output transform. Parameter layout for the perceptron is
 * [W1 row-major (H x k), b1 (H), w2 (H), b2].
 */
class ParamFamily {
 public:
  enum class Kind { tabular, linear, perceptron };

  static ParamFamily tabular(int num_states, double init = 0.0,
                             OutputTransform transform = OutputTransform::identity) {
    ParamFamily f(Kind::tabular, transform, Matrix::Identity(num_states, num_states), 0);
    f.params = Vector::Constant(num_states, init);
    return f;
  }

  static ParamFamily linear(Matrix features, OutputTransform transform = OutputTransform::identity) {
    const auto k = features.cols();
    ParamFamily f(Kind::linear, transform, std::move(features), 0);
    f.params = Vector::Zero(k);
    return f;
  }

  /// Weights drawn uniformly from +-1/sqrt(fan_in); output bias `output_bias`.
  static ParamFamily perceptron(Matrix features, int hidden, std::uint64_t seed,
                                OutputTransform transform = OutputTransform::identity, double output_bias = 0.0) {
    if (hidden < 1) throw std::invalid_argument("perceptron needs at least one hidden unit");
    const int k = static_cast<int>(features.cols());
    ParamFamily f(Kind::perceptron, transform, std::move(features), hidden);
    f.params = Vector::Zero(f.parameter_count());
    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(k));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (int i = 0; i < hidden * k; ++i) f.params[i] = rng.uniform(-s1, s1);
    for (int j = 0; j < hidden; ++j) f.params[hidden * k + hidden + j] = rng.uniform(-s2, s2);
    f.params[f.parameter_count() - 1] = output_bias;
    return f;
  }

  Kind kind() const noexcept { return kind_; }
  OutputTransform transform() const noexcept { return transform_; }
  int num_states() const noexcept { return static_cast<int>(features_.rows()); }

  int parameter_count() const noexcept {
    const int k = static_cast<int>(features_.cols());
    switch (kind_) {
      case Kind::tabular:
      case Kind::linear:
        return k;
      case Kind::perceptron:
        return hidden_ * k + 2 * hidden_ + 1;
    }
    return 0;
  }

  double eval(int s) const { return apply(pre_activation(s)); }

  /// grad += coef * d out(s) / d params
  void accumulate_gradient(int s, double coef, Vector& grad) const {
    if (coef == 0.0) return;
    const double z = pre_activation(s);
    const double c = coef * derivative(z);
    switch (kind_) {
      case Kind::tabular:
        grad[s] += c;
        return;
      case Kind::linear:
        grad.noalias() += c * features_.row(s).transpose();
        return;
      case Kind::perceptron: {
        const int k = static_cast<int>(features_.cols());
        const int H = hidden_;
        const double* p = params.data();
        for (int j = 0; j < H; ++j) {
          double a = p[H * k + j];
          for (int i = 0; i < k; ++i) a += p[j * k + i] * features_(s, i);
          const double h = std::tanh(a);
          const double back = c * p[H * k + H + j] * (1.0 - h * h);
          for (int i = 0; i < k; ++i) grad[j * k + i] += back * features_(s, i);
          grad[H * k + j] += back;
          grad[H * k + H + j] += c * h;
        }
        grad[H * k + 2 * H] += c;
        return;
      }
    }
  }

  Vector materialize() const {
    Vector out(num_states());
    for (int s = 0; s < num_states(); ++s) out[s] = eval(s);
    return out;
  }

  const Matrix& features() const noexcept { return features_; }

  Vector params;

 private:
  ParamFamily(Kind kind, OutputTransform transform, Matrix features, int hidden)
      : kind_(kind), transform_(transform), features_(std::move(features)), hidden_(hidden) {}

  double pre_activation(int s) const {
    switch (kind_) {
      case Kind::tabular:
        return params[s];
      case Kind::linear:
        return features_.row(s).dot(params);
      case Kind::perceptron: {
        const int k = static_cast<int>(features_.cols());
        const int H = hidden_;
        double out = params[H * k + 2 * H];
        for (int j = 0; j < H; ++j) {
          double a = params[H * k + j];
          for (int i = 0; i < k; ++i) a += params[j * k + i] * features_(s, i);
          out += params[H * k + H + j] * std::tanh(a);
        }
        return out;
      }
    }
    return 0.0;
  }

  double apply(double z) const {
    if (transform_ == OutputTransform::identity) return z;
    return z > 30.0 ? z : std::log1p(std::exp(z));
  }

  double derivative(double z) const {
    if (transform_ == OutputTransform::identity) return 1.0;
    return 1.0 / (1.0 + std::exp(-z));
  }

  Kind kind_;
  OutputTransform transform_;
  Matrix features_;
  int hidden_;
};

/// softplus^{-1}(y) for y > 0
inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

struct MinimaxConfig {
  /// transitions per minibatch; 0 takes the full weighted set every step
  int batch_size = 0;
  int outer_steps = 1000;
  int inner_steps = 5;
  double step_primal = 1e-2;
  double step_test = 1e-1;
  std::uint64_t seed = 0;
  /// rescale tabular w to mean one under the data distribution after each step
  bool normalize_tabular = true;
};

/// Weighted view of the data used for one gradient evaluation.
struct Minibatch {
  std::vector<WeightedTransition> transitions;
  std::vector<WeightedState> initial;
};

namespace detail {

inline void check_minimax_config(const MinimaxConfig& cfg) {
  if (cfg.batch_size < 0 || cfg.outer_steps < 0 || cfg.inner_steps < 1 || !(cfg.step_primal > 0.0) ||
      !(cfg.step_test > 0.0)) {
    throw std::invalid_argument("minimax config needs positive counts and step sizes");
  }
}

class MinibatchSampler {
 public:
  MinibatchSampler(const TransitionSet& set, int batch_size, std::uint64_t seed)
      : set_(set), batch_size_(set.exact ? 0 : batch_size), rng_(seed) {
    if (set.transitions.empty()) throw std::invalid_argument("minimax learner: empty transition set");
    double acc = 0.0;
    for (const auto& t : set.transitions) cumulative_.push_back(acc += t.weight);
    acc = 0.0;
    for (const auto& s : set.initial) initial_cumulative_.push_back(acc += s.weight);
    if (batch_size_ == 0) {
      full_.transitions = set.transitions;
      full_.initial = set.initial;
    }
  }

  const Minibatch& next() {
    if (batch_size_ == 0) return full_;
    const double w = 1.0 / batch_size_;
    current_.transitions.clear();
    current_.initial.clear();
    for (int i = 0; i < batch_size_; ++i) {
      WeightedTransition t = set_.transitions[rng_.categorical(cumulative_)];
      t.weight = w;
      current_.transitions.push_back(t);
    }
    if (!initial_cumulative_.empty()) {
      for (int i = 0; i < batch_size_; ++i) {
        current_.initial.push_back({set_.initial[rng_.categorical(initial_cumulative_)].state, w});
      }
    }
    return current_;
  }

 private:
  const TransitionSet& set_;
  int batch_size_;
  Rng rng_;
  std::vector<double> cumulative_;
  std::vector<double> initial_cumulative_;
  Minibatch full_;
  Minibatch current_;
};

inline void check_finite_loss(double loss, const char* who, int step) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << who << ": non-finite loss at outer step " << step << " (loss=" << loss
        << "); reduce the step sizes";
    throw training_error(msg.str());
  }
}

inline Vector state_mass(const TransitionSet& set, int num_states) {
  Vector m = Vector::Zero(num_states);
  for (const auto& t : set.transitions) m[t.state] += t.weight;
  return m;
}

}  // namespace detail

struct MinimaxGradient {
  double loss = 0.0;
  Vector primal;
  Vector test;
};

/**
 * Density-ratio objective, minimized over w and maximized over f:
 *   L(w, f) = E[w(s) f(s) - gamma w(s) beta(a|s) f(s')] - (1-gamma) E_0[f(s0)] - 1/2 E[f(s)^2]
 * Its inner maximum is zero exactly when d_pi0 w = d_pi.
 */
inline MinimaxGradient density_ratio_gradient(const Minibatch& mb, const ParamFamily& w, const ParamFamily& f,
                                              const Policy& target, const Policy& behavior, double gamma) {
  MinimaxGradient g{0.0, Vector::Zero(w.parameter_count()), Vector::Zero(f.parameter_count())};
  for (const auto& t : mb.transitions) {
    if (t.weight == 0.0) continue;
    const double beta = importance_ratio(target, behavior, t.state, t.action);
    const double ws = w.eval(t.state);
    const double fs = f.eval(t.state);
    const double fn = f.eval(t.next_state);
    g.loss += t.weight * (ws * fs - gamma * ws * beta * fn - 0.5 * fs * fs);
    f.accumulate_gradient(t.state, t.weight * (ws - fs), g.test);
    f.accumulate_gradient(t.next_state, -t.weight * gamma * ws * beta, g.test);
    w.accumulate_gradient(t.state, t.weight * (fs - gamma * beta * fn), g.primal);
  }
  for (const auto& s0 : mb.initial) {
    g.loss -= (1.0 - gamma) * s0.weight * f.eval(s0.state);
    f.accumulate_gradient(s0.state, -(1.0 - gamma) * s0.weight, g.test);
  }
  return g;
}

/**
 * Value objective, minimized over V and maximized over f:
 *   L(V, f) = E[(V(s) - beta(a|s)(r + gamma V(s'))) f(s) - 1/2 f(s)^2]
 * The inner maximizer is the Bellman residual of V.
 */
inline MinimaxGradient value_gradient(const Minibatch& mb, const ParamFamily& v, const ParamFamily& f,
                                      const Policy& target, const Policy& behavior, double gamma) {
  MinimaxGradient g{0.0, Vector::Zero(v.parameter_count()), Vector::Zero(f.parameter_count())};
  for (const auto& t : mb.transitions) {
    if (t.weight == 0.0) continue;
    const double beta = importance_ratio(target, behavior, t.state, t.action);
    const double td = v.eval(t.state) - beta * (t.reward + gamma * v.eval(t.next_state));
    const double fs = f.eval(t.state);
    g.loss += t.weight * (td * fs - 0.5 * fs * fs);
    f.accumulate_gradient(t.state, t.weight * (td - fs), g.test);
    v.accumulate_gradient(t.state, t.weight * fs, g.primal);
    v.accumulate_gradient(t.next_state, -t.weight * gamma * beta * fs, g.primal);
  }
  return g;
}

struct MinimaxResult {
  StateFunction function;
  ParamFamily primal;
  ParamFamily test;
  double final_loss = 0.0;
};

namespace detail {

template <class Gradient, class Project>
MinimaxResult run_minimax(const TransitionSet& set, ParamFamily primal, ParamFamily test, const MinimaxConfig& cfg,
                          const char* who, Gradient gradient, Project project) {
  check_minimax_config(cfg);
  MinibatchSampler sampler(set, cfg.batch_size, cfg.seed);
  double loss = 0.0;
  for (int step = 0; step < cfg.outer_steps; ++step) {
    const Minibatch& mb = sampler.next();
    for (int k = 0; k < cfg.inner_steps; ++k) {
      const MinimaxGradient g = gradient(mb, primal, test);
      check_finite_loss(g.loss, who, step);
      test.params += cfg.step_test * g.test;
    }
    const MinimaxGradient g = gradient(mb, primal, test);
    loss = g.loss;
    check_finite_loss(loss, who, step);
    primal.params -= cfg.step_primal * g.primal;
    project(primal);
  }
  return MinimaxResult{StateFunction(primal.materialize(), Role::value), std::move(primal), std::move(test), loss};
}

}  // namespace detail

inline MinimaxResult fit_density_ratio_minimax(const TransitionSet& set, const Policy& target, const Policy& behavior,
                                               const Discount& disc, ParamFamily family_w, ParamFamily family_f,
                                               const MinimaxConfig& cfg) {
  detail::require_discounted(disc, "fit_density_ratio_minimax");
  const double gamma = disc.gamma();
  const bool normalize = cfg.normalize_tabular && family_w.kind() == ParamFamily::Kind::tabular &&
                         family_w.transform() == OutputTransform::identity;
  const Vector mass = detail::state_mass(set, family_w.num_states());
  auto gradient = [&](const Minibatch& mb, const ParamFamily& w, const ParamFamily& f) {
    return density_ratio_gradient(mb, w, f, target, behavior, gamma);
  };
  auto project = [&](ParamFamily& w) {
    if (!normalize) return;
    const double mean = mass.dot(w.params);
    if (mean > 0.0) w.params /= mean;
  };
  MinimaxResult out = detail::run_minimax(set, std::move(family_w), std::move(family_f), cfg,
                                          "fit_density_ratio_minimax", gradient, project);
  out.function = StateFunction(out.function.values.cwiseMax(0.0), Role::density_ratio);
  return out;
}

inline MinimaxResult fit_value_minimax(const TransitionSet& set, const Policy& target, const Policy& behavior,
                                       const Discount& disc, ParamFamily family_v, ParamFamily family_f,
                                       const MinimaxConfig& cfg) {
  detail::require_discounted(disc, "fit_value_minimax");
  const double gamma = disc.gamma();
  auto gradient = [&](const Minibatch& mb, const ParamFamily& v, const ParamFamily& f) {
    return value_gradient(mb, v, f, target, behavior, gamma);
  };
  return detail::run_minimax(set, std::move(family_v), std::move(family_f), cfg, "fit_value_minimax", gradient,
                             [](ParamFamily&) {});
}

}  // namespace drope
