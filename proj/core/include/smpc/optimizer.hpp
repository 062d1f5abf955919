#pragma once

#include <vector>

#include "smpc/lp.hpp"
#include "smpc/qp.hpp"
#include "smpc/reachability.hpp"

namespace smpc {

struct LinearSystem {
  Matrix a;
  Matrix b;

  int nx() const { return static_cast<int>(a.rows()); }
  int nu() const { return static_cast<int>(b.cols()); }
};

// Finite-horizon nominal problem
//   min Σ_{i=0}^{N−1} (‖z_i‖²_Q + ‖v_i‖²_R) + ‖z_N‖²_{Q_f}
//   s.t. z_{i+1} = A z_i + B v_i, z_i ∈ 𝒵, v_i ∈ 𝒱, z_N ∈ 𝒵_f.
// `stage_state_sets` / `stage_input_sets`, when sized `horizon`, replace the
// uniform sets with per-stage ones (stage i for z_i resp. v_i); this carries
// the horizon-varying tightening used by the cost-conditioned variant.
struct MpcProblem {
  LinearSystem system;
  int horizon = 1;
  Matrix stage_state_cost;  // Q
  Matrix stage_input_cost;  // R
  Matrix terminal_cost;     // Q_f
  Polytope state_set;       // 𝒵
  Polytope input_set;       // 𝒱
  Polytope terminal_set;    // 𝒵_f
  std::vector<Polytope> stage_state_sets;
  std::vector<Polytope> stage_input_sets;

  const Polytope& state_set_at(int i) const {
    return stage_state_sets.empty() ? state_set : stage_state_sets.at(i);
  }
  const Polytope& input_set_at(int i) const {
    return stage_input_sets.empty() ? input_set : stage_input_sets.at(i);
  }
};

// Throws DomainError on dimension mismatches or indefinite cost matrices;
// a cheap precondition check shared by build_qp and friends.
void validate_problem(const MpcProblem& problem);

enum class SolveStatus { kOptimal, kInfeasible, kError };

struct QpSolution {
  SolveStatus status = SolveStatus::kError;
  std::vector<Vector> nominal_states;  // z_0 … z_N
  std::vector<Vector> nominal_inputs;  // v_0 … v_{N−1}
  double optimal_cost = 0.0;
};

// Condensed QP over the stacked inputs V ∈ R^{N·nu}: states are eliminated
// through the dynamics, so the Hessian inherits strict convexity from R.
// Terminal-set faces that come in opposing ±a pairs with zero total slack
// (the 𝒵_f = {0} encoding) are emitted as equality rows. Stage-0 state
// membership of z0 enters as constant rows so infeasibility of the initial
// condition is reported by the same certificate machinery.
DenseQp build_qp(const MpcProblem& problem, const Vector& z0);

QpSolution solve_qp(const MpcProblem& problem, const Vector& z0);

// Phase-1 feasibility of the same constraint system, decided by the simplex
// route — deliberately independent of the active-set QP solver.
bool is_feasible(const MpcProblem& problem, const Vector& z0);

// Q_f = DARE solution; pairs with the unconstrained LQR law as the terminal
// ingredient that certifies the one-step cost decrease.
Matrix terminal_cost_from_lqr(const LinearSystem& system, const Matrix& q,
                              const Matrix& r);

// Maximal polytope Ω ⊆ {z : z ∈ state_set, z ∈ input_rows_for_k} with
// a_k·Ω ⊆ Ω, by backward iteration with LP redundancy elimination
// (tolerance 1e-8). `input_rows_for_k` is the input set pre-multiplied by
// the feedback gain, i.e. {z : (G·K)z ≤ h}.
// Throws IterationLimit if not finitely determined within 500 iterations.
Polytope maximal_invariant_terminal_set(const Matrix& a_k,
                                        const Polytope& state_set,
                                        const Polytope& input_rows_for_k);

// Componentwise bounding box of { z0 : Eq. (9) feasible from z0 }, found by
// LPs over the joint (z0, V) polytope. Requires boundedness (Assumption-2
// style); throws Unbounded otherwise.
std::pair<Vector, Vector> feasible_initial_box(const MpcProblem& problem);

}  // namespace smpc
