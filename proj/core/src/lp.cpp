#include "smpc/lp.hpp"

#include <cmath>
#include <vector>

namespace smpc {

namespace {

constexpr double kPivTol = 1e-10;

// Tableau layout: rows 0..r-1 are constraints, row r is the objective row
// holding reduced costs (for minimization of the row's objective); the last
// column is the right-hand side. Bland's rule guarantees termination.
void pivot(Matrix& t, std::vector<int>& basis, int row, int col) {
  t.row(row) /= t(row, col);
  for (int i = 0; i < t.rows(); ++i) {
    if (i == row) continue;
    const double f = t(i, col);
    if (f != 0.0) t.row(i) -= f * t.row(row);
  }
  basis[row] = col;
}

// Minimizes the objective encoded in the last row. `ncols` excludes the rhs
// column; columns ≥ ncols (if any) are frozen out of pricing.
void run_simplex(Matrix& t, std::vector<int>& basis, int ncols) {
  const int rows = static_cast<int>(t.rows()) - 1;
  const long iter_cap = 200L * (rows + ncols + 10);
  for (long iter = 0;; ++iter) {
    if (iter > iter_cap) {
      throw IterationLimit("solve_dense_lp: simplex iteration cap reached");
    }
    int enter = -1;
    for (int j = 0; j < ncols; ++j) {
      if (t(rows, j) < -kPivTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return;  // optimal
    int leave = -1;
    double best = 0.0;
    for (int i = 0; i < rows; ++i) {
      if (t(i, enter) > kPivTol) {
        const double ratio = t(i, t.cols() - 1) / t(i, enter);
        if (leave < 0 || ratio < best - 1e-12 ||
            (ratio < best + 1e-12 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) throw Unbounded("solve_dense_lp: unbounded direction");
    pivot(t, basis, leave, enter);
  }
}

}  // namespace

LpResult solve_dense_lp(const DenseLp& lp) {
  const int n = lp.vars();
  const int m = static_cast<int>(lp.bin.size());
  const int p = static_cast<int>(lp.beq.size());
  if ((m > 0 && lp.ain.cols() != n) || (p > 0 && lp.aeq.cols() != n)) {
    throw DomainError("solve_dense_lp: dimension mismatch");
  }
  const int rows = m + p;
  // Standard-form variables: x⁺ (n), x⁻ (n), slacks (m), artificials (rows).
  const int nstruct = 2 * n + m;
  const int ncols = nstruct + rows;

  Matrix t = Matrix::Zero(rows + 1, ncols + 1);
  for (int i = 0; i < m; ++i) {
    t.row(i).segment(0, n) = lp.ain.row(i);
    t.row(i).segment(n, n) = -lp.ain.row(i);
    t(i, 2 * n + i) = 1.0;
    t(i, ncols) = lp.bin(i);
  }
  for (int i = 0; i < p; ++i) {
    t.row(m + i).segment(0, n) = lp.aeq.row(i);
    t.row(m + i).segment(n, n) = -lp.aeq.row(i);
    t(m + i, ncols) = lp.beq(i);
  }
  for (int i = 0; i < rows; ++i) {
    if (t(i, ncols) < 0.0) t.row(i) = -t.row(i);
    t(i, nstruct + i) = 1.0;
  }

  // Phase 1: minimize the sum of artificials.
  std::vector<int> basis(rows);
  for (int i = 0; i < rows; ++i) {
    basis[i] = nstruct + i;
    t.row(rows) -= t.row(i);
  }
  t.row(rows).segment(nstruct, rows).setZero();
  run_simplex(t, basis, ncols);

  const double scale = std::max(
      {1.0, m > 0 ? lp.bin.cwiseAbs().maxCoeff() : 0.0,
       p > 0 ? lp.beq.cwiseAbs().maxCoeff() : 0.0});
  LpResult res;
  if (-t(rows, ncols) > 1e-8 * scale) {
    res.status = LpStatus::kInfeasible;
    return res;
  }
  // Drive any artificial still in the basis out (degenerate row) or note the
  // row as redundant.
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < nstruct) continue;
    int enter = -1;
    for (int j = 0; j < nstruct; ++j) {
      if (std::fabs(t(i, j)) > kPivTol) {
        enter = j;
        break;
      }
    }
    if (enter >= 0) pivot(t, basis, i, enter);
  }

  // Phase 2: rebuild the objective row for max cᵀx (minimize −cᵀ(x⁺−x⁻)).
  t.row(rows).setZero();
  t.row(rows).segment(0, n) = -lp.c;
  t.row(rows).segment(n, n) = lp.c;
  for (int i = 0; i < rows; ++i) {
    if (basis[i] >= nstruct) continue;
    const double f = t(rows, basis[i]);
    if (f != 0.0) t.row(rows) -= f * t.row(i);
  }
  try {
    run_simplex(t, basis, nstruct);
  } catch (const Unbounded&) {
    res.status = LpStatus::kUnbounded;
    return res;
  }

  Vector xs = Vector::Zero(nstruct);
  for (int i = 0; i < rows; ++i) {
    if (basis[i] < nstruct) xs(basis[i]) = t(i, ncols);
  }
  res.status = LpStatus::kOptimal;
  res.x = xs.segment(0, n) - xs.segment(n, n);
  res.objective = lp.c.dot(res.x);
  return res;
}

}  // namespace smpc
