#pragma once

#include "smpc/errors.hpp"
#include "smpc/numerics.hpp"

namespace smpc {

enum class LpStatus { kOptimal, kUnbounded, kInfeasible };

// maximize cᵀx  s.t.  ain·x ≤ bin,  aeq·x = beq,  x free.
struct DenseLp {
  Vector c;
  Matrix ain;
  Vector bin;
  Matrix aeq;  // may be 0×n
  Vector beq;

  int vars() const { return static_cast<int>(c.size()); }
};

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Vector x;
  double objective = 0.0;
};

// Dense two-phase tableau simplex with Bland's rule. Intended for the small
// feasibility and redundancy subproblems that arise in set computations; it
// provides a solution route independent of the active-set QP machinery.
LpResult solve_dense_lp(const DenseLp& lp);

}  // namespace smpc
