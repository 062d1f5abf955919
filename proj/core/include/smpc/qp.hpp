#pragma once

#include "smpc/numerics.hpp"

namespace smpc {

// Strictly convex dense QP
//   min ½ xᵀH x + gᵀx + c0   s.t.  aeq x = beq,  ain x ≤ bin.
struct DenseQp {
  Matrix h;
  Vector g;
  double c0 = 0.0;
  Matrix aeq;  // may have zero rows
  Vector beq;
  Matrix ain;
  Vector bin;

  int vars() const { return static_cast<int>(g.size()); }
};

enum class QpStatus { kOptimal, kInfeasible };

struct QpResult {
  QpStatus status = QpStatus::kInfeasible;
  Vector x;
  double objective = 0.0;  // includes c0
  // KKT multipliers (optimal):  H x + g + aeqᵀ·eq_duals + ainᵀ·in_duals = 0,
  // in_duals ≥ 0.
  Vector eq_duals;
  Vector in_duals;
  // Farkas certificate (infeasible):  ainᵀ·farkas_in + aeqᵀ·farkas_eq = 0,
  // farkas_in ≥ 0,  binᵀ·farkas_in + beqᵀ·farkas_eq < 0.
  Vector farkas_eq;
  Vector farkas_in;
  int iterations = 0;
};

// Goldfarb-Idnani dual active-set method. Requires H positive definite.
// Throws IterationLimit when the active-set loop exceeds its cap.
QpResult solve_dense_qp(const DenseQp& qp);

// Independent KKT residual check (max of stationarity, primal feasibility,
// complementarity, dual sign violations). Implemented apart from the solver.
double kkt_residual(const DenseQp& qp, const QpResult& result);

// Residual of an infeasibility certificate: max of ‖ainᵀy + aeqᵀμ‖_∞,
// negative-y violation, and max(0, binᵀy + beqᵀμ + margin). Zero means the
// certificate proves infeasibility with at least `margin` slack.
double farkas_residual(const DenseQp& qp, const QpResult& result,
                       double margin = 0.0);

}  // namespace smpc
