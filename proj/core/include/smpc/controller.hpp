#pragma once

#include "smpc/optimizer.hpp"

namespace smpc {

enum class Mode { kM1, kM2 };

struct ControllerState {
  Vector previous_predicted;           // z₁(k−1)
  std::vector<Vector> previous_inputs; // shifted backup V̄, length N
  Matrix variance;                     // error-variance state (SMPC-c only)
  int step = 0;
};

struct StepRecord {
  Mode mode = Mode::kM1;
  Vector nominal_state;  // z(k)
  Vector nominal_input;  // v(k)
  Vector applied_input;  // u(k) = v(k) + K e(k)
  Vector error;          // e(k) = x(k) − z(k)
  double optimal_cost = 0.0;
};

struct ControllerOptions {
  // Inequality slack added to the nominal problem before the mode decision
  // and the Mode-2 resolve; the Mode-1/Mode-2 threshold in effect.
  double feasibility_tol = 1e-6;
  // Ablation: apply the shifted backup sequence directly in Mode 2 instead
  // of re-optimizing from z₁(k−1).
  bool mode2_apply_shifted = false;
};

struct StepResult {
  Vector u;
  ControllerState next;
  StepRecord record;
};

// V̄ = {v₁*, …, v*_{N−1}, K z*_N}: feasible suboptimal shift of an optimal
// sequence, the recursive-feasibility backup.
std::vector<Vector> shifted_backup(const QpSolution& previous,
                                   const Matrix& k_gain,
                                   const MpcProblem& problem);

// Feasibility-conditional update: z(k) = x_k when the nominal problem is
// feasible there (Mode 1, error reset to zero), else z(k) = z₁(k−1)
// (Mode 2). Applied input is u = v₀*(z(k)) + k_gain·(x_k − z(k)).
StepResult smpc_prs_step(const ControllerState& state, const Vector& x_k,
                         const MpcProblem& problem, const Matrix& k_gain,
                         const ControllerOptions& opts = {});

// Inputs the cost-conditioned baseline needs to rebuild its horizon-varying
// tightening each step from the current error-variance state.
struct SmpcCContext {
  MpcProblem base;      // untightened state/input sets
  Matrix k_gain;
  Matrix w_cov;
  // Per-face one-sided satisfaction levels (already union-bound-split, e.g.
  // (1+p)/2 for a symmetric pair); quantiles are taken per face.
  std::vector<double> state_face_levels;
  std::vector<double> input_face_levels;
};

// base with stage sets tightened by the i-step predicted error variance
// Σ_i = A_K^i S A_K^iᵀ + Σ_{j<i} A_K^j W A_K^jᵀ. Throws EmptyTightening when
// a stage set collapses.
MpcProblem tightened_problem(const SmpcCContext& ctx, const Matrix& s0);

// Baseline variant: picks Mode 1 only when the problem is feasible at x_k
// AND J*(x_k) ≤ J*(z₁(k−1)) (ties within 1e-9 go to Mode 1). The variance
// state resets to zero on Mode 1 and propagates through A_K otherwise.
StepResult smpc_c_step(const ControllerState& state, const Vector& x_k,
                       const SmpcCContext& ctx,
                       const ControllerOptions& opts = {});

}  // namespace smpc
