#pragma once

#include <stdexcept>
#include <string>

namespace opinion_game {

/// Malformed game instance or file.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside a solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A linear system judged singular by the reciprocal condition estimate.
class SingularMatrixError : public SolverError {
 public:
  SingularMatrixError(const std::string& what, double rcond)
      : SolverError(what + " (reciprocal condition estimate " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}

  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

/// Requested operation has no implementation for this instance.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace opinion_game
