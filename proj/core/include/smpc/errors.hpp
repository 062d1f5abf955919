#pragma once

#include <stdexcept>
#include <string>

namespace smpc {

// Fixed-point iteration failed to contract (unstable matrix, unstabilizable pair).
struct NonConvergent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of the operation.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Covariance factorization failed: matrix is indefinite.
struct CholeskyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Support function query in a direction where the set is unbounded.
struct Unbounded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pontryagin difference excludes the origin; carries the offending face.
struct EmptyTightening : std::runtime_error {
  explicit EmptyTightening(const std::string& msg, int face_index)
      : std::runtime_error(msg), face(face_index) {}
  int face;
};

// Solver hit its iteration cap; surfaced, never treated as infeasible.
struct IterationLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The MPC problem is infeasible at the initial state (violates the
// initial-feasibility assumption; fatal for a closed-loop run).
struct InitialInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mode-2 re-optimization from the backup state failed. The backup is
// guaranteed feasible, so this indicates a numerical tolerance breach.
struct BackupInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration document failed schema validation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace smpc
