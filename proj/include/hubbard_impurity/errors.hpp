#ifndef HUBBARD_IMPURITY_ERRORS_HPP
#define HUBBARD_IMPURITY_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hubimp {

// Violated parameter invariant or malformed input.
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver failed to reach its tolerance.
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluation hit a pole (vanishing denominator).
struct pole_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical claim that should hold did not (e.g. several real cubic roots).
struct anomaly_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hubimp

#endif
