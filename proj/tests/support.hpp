#pragma once

#include <cmath>

#include "drope/drope.hpp"

namespace drope::testing {

inline double max_abs(const Vector& v) { return v.lpNorm<Eigen::Infinity>(); }

/// Solves the 2x2 system M x = b by Cramer's rule.
inline Vector solve2(double m00, double m01, double m10, double m11, double b0, double b1) {
  const double det = m00 * m11 - m01 * m10;
  Vector x(2);
  x << (b0 * m11 - m01 * b1) / det, (m00 * b1 - b0 * m10) / det;
  return x;
}

/// TwoState under flip probability p: V from (I - gamma P) V = r by hand.
inline Vector two_state_value(double p, double gamma) {
  const double r0 = 0.5 * p;
  const double r1 = (1.0 - p) * 1.0 + p * 0.2;
  return solve2(1.0 - gamma * (1.0 - p), -gamma * p, -gamma * p, 1.0 - gamma * (1.0 - p), r0, r1);
}

/// TwoState visitation from (I - gamma P^T) d = (1 - gamma) e0 by hand.
inline Vector two_state_visitation(double p, double gamma) {
  return solve2(1.0 - gamma * (1.0 - p), -gamma * p, -gamma * p, 1.0 - gamma * (1.0 - p), 1.0 - gamma, 0.0);
}

/// Batch holding the given transitions as one trajectory.
inline TrajectoryBatch single_trajectory(std::vector<Transition> steps) {
  for (std::size_t t = 0; t < steps.size(); ++t) steps[t].time = static_cast<int>(t);
  TrajectoryBatch b;
  b.trajectories.push_back(std::move(steps));
  return b;
}

}  // namespace drope::testing
