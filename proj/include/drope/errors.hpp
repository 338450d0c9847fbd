#pragma once

#include <stdexcept>
#include <string>

namespace drope {

/// Inputs whose dimensions disagree (states, actions, vector lengths).
class shape_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The behavior policy never reaches something the target policy needs.
class coverage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A self-normalized estimator whose weight sum is zero.
class degenerate_weights_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two exact routes to the same quantity disagree.
class oracle_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Minimax training produced a non-finite loss.
class training_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drope
