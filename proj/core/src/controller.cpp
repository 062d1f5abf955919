#include "smpc/controller.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace smpc {

namespace {

// Inequality slack on the state/input sets only; the terminal rows stay
// exact so the equality encoding of a point terminal set survives.
MpcProblem relax(const MpcProblem& problem, double tol) {
  MpcProblem out = problem;
  out.state_set.offsets.array() += tol;
  out.input_set.offsets.array() += tol;
  for (auto& set : out.stage_state_sets) set.offsets.array() += tol;
  for (auto& set : out.stage_input_sets) set.offsets.array() += tol;
  return out;
}

// QpSolution from rolling a fixed input sequence out of z; used by the
// apply-shifted ablation in Mode 2.
QpSolution rollout_solution(const MpcProblem& problem, const Vector& z,
                            const std::vector<Vector>& inputs) {
  QpSolution sol;
  sol.status = SolveStatus::kOptimal;
  sol.nominal_inputs = inputs;
  sol.nominal_states.resize(problem.horizon + 1);
  sol.nominal_states[0] = z;
  double cost = 0.0;
  for (int i = 0; i < problem.horizon; ++i) {
    const Vector& zi = sol.nominal_states[i];
    cost += zi.dot(problem.stage_state_cost * zi) +
            inputs[i].dot(problem.stage_input_cost * inputs[i]);
    sol.nominal_states[i + 1] = problem.system.a * zi +
                                problem.system.b * inputs[i];
  }
  const Vector& zn = sol.nominal_states.back();
  cost += zn.dot(problem.terminal_cost * zn);
  sol.optimal_cost = cost;
  return sol;
}

StepResult assemble(const ControllerState& state, const Vector& x_k,
                    const MpcProblem& problem, const Matrix& k_gain,
                    Mode mode, const Vector& z, const QpSolution& sol,
                    Matrix next_variance) {
  StepResult out;
  out.record.mode = mode;
  out.record.nominal_state = z;
  out.record.nominal_input = sol.nominal_inputs[0];
  out.record.error = x_k - z;
  out.record.applied_input =
      sol.nominal_inputs[0] + k_gain * out.record.error;
  out.record.optimal_cost = sol.optimal_cost;
  out.u = out.record.applied_input;
  out.next.previous_predicted = sol.nominal_states[1];
  out.next.previous_inputs = shifted_backup(sol, k_gain, problem);
  out.next.variance = std::move(next_variance);
  out.next.step = state.step + 1;
  return out;
}

}  // namespace

std::vector<Vector> shifted_backup(const QpSolution& previous,
                                   const Matrix& k_gain,
                                   const MpcProblem& problem) {
  std::vector<Vector> shifted;
  shifted.reserve(problem.horizon);
  for (int i = 1; i < problem.horizon; ++i) {
    shifted.push_back(previous.nominal_inputs[i]);
  }
  shifted.push_back(k_gain * previous.nominal_states.back());
  return shifted;
}

StepResult smpc_prs_step(const ControllerState& state, const Vector& x_k,
                         const MpcProblem& problem, const Matrix& k_gain,
                         const ControllerOptions& opts) {
  const MpcProblem relaxed = relax(problem, opts.feasibility_tol);
  const int nx = problem.system.nx();
  const QpSolution at_x = solve_qp(relaxed, x_k);
  if (at_x.status == SolveStatus::kOptimal) {
    return assemble(state, x_k, problem, k_gain, Mode::kM1, x_k, at_x,
                    Matrix::Zero(nx, nx));
  }
  if (state.step == 0) {
    throw InitialInfeasible("smpc_prs_step: nominal problem infeasible at "
                            "the initial state");
  }
  const Vector& z = state.previous_predicted;
  QpSolution backup;
  if (opts.mode2_apply_shifted) {
    backup = rollout_solution(problem, z, state.previous_inputs);
  } else {
    backup = solve_qp(relaxed, z);
    if (backup.status != SolveStatus::kOptimal) {
      throw BackupInfeasible(
          "smpc_prs_step: Mode-2 resolve from z1(k-1) infeasible at step " +
          std::to_string(state.step));
    }
  }
  return assemble(state, x_k, problem, k_gain, Mode::kM2, z, backup,
                  Matrix::Zero(nx, nx));
}

MpcProblem tightened_problem(const SmpcCContext& ctx, const Matrix& s0) {
  const MpcProblem& base = ctx.base;
  const int n = base.horizon;
  const Matrix a_k = base.system.a + base.system.b * ctx.k_gain;
  if (static_cast<int>(ctx.state_face_levels.size()) !=
          base.state_set.faces() ||
      static_cast<int>(ctx.input_face_levels.size()) !=
          base.input_set.faces()) {
    throw DomainError("tightened_problem: face level count mismatch");
  }

  MpcProblem out = base;
  out.stage_state_sets.clear();
  out.stage_input_sets.clear();
  Matrix sigma = s0;  // Σ_i = A_K^i s0 A_K^iᵀ + Σ_{j<i} A_K^j W A_K^jᵀ
  for (int i = 0; i < n; ++i) {
    Polytope zs = base.state_set;
    for (int f = 0; f < zs.faces(); ++f) {
      const RowVector a = zs.normals.row(f);
      const double var = std::max(0.0, a.dot(sigma * a.transpose()));
      const double hw =
          normal_quantile(ctx.state_face_levels[f]) * std::sqrt(var);
      zs.offsets(f) -= hw;
      if (zs.offsets(f) < 0.0) {
        throw EmptyTightening("tightened_problem: state face " +
                                  std::to_string(f) + " empty at stage " +
                                  std::to_string(i),
                              f);
      }
    }
    Polytope vs = base.input_set;
    const Matrix sigma_u = ctx.k_gain * sigma * ctx.k_gain.transpose();
    for (int f = 0; f < vs.faces(); ++f) {
      const RowVector g = vs.normals.row(f);
      const double var = std::max(0.0, g.dot(sigma_u * g.transpose()));
      const double hw =
          normal_quantile(ctx.input_face_levels[f]) * std::sqrt(var);
      vs.offsets(f) -= hw;
      if (vs.offsets(f) < 0.0) {
        throw EmptyTightening("tightened_problem: input face " +
                                  std::to_string(f) + " empty at stage " +
                                  std::to_string(i),
                              f);
      }
    }
    out.stage_state_sets.push_back(std::move(zs));
    out.stage_input_sets.push_back(std::move(vs));
    sigma = a_k * sigma * a_k.transpose() + ctx.w_cov;
  }
  return out;
}

StepResult smpc_c_step(const ControllerState& state, const Vector& x_k,
                       const SmpcCContext& ctx,
                       const ControllerOptions& opts) {
  const int nx = ctx.base.system.nx();
  const Matrix a_k = ctx.base.system.a + ctx.base.system.b * ctx.k_gain;
  const Matrix s_reset = Matrix::Zero(nx, nx);

  QpSolution at_x;
  at_x.status = SolveStatus::kInfeasible;
  try {
    at_x = solve_qp(relax(tightened_problem(ctx, s_reset),
                          opts.feasibility_tol),
                    x_k);
  } catch (const EmptyTightening&) {
  }

  if (state.step == 0) {
    if (at_x.status != SolveStatus::kOptimal) {
      throw InitialInfeasible("smpc_c_step: nominal problem infeasible at "
                              "the initial state");
    }
    return assemble(state, x_k, ctx.base, ctx.k_gain, Mode::kM1, x_k, at_x,
                    s_reset);
  }

  const Matrix s_prop =
      a_k * state.variance * a_k.transpose() + ctx.w_cov;
  QpSolution at_z;
  at_z.status = SolveStatus::kInfeasible;
  try {
    at_z = solve_qp(relax(tightened_problem(ctx, s_prop),
                          opts.feasibility_tol),
                    state.previous_predicted);
  } catch (const EmptyTightening&) {
  }

  const bool pick_m1 =
      at_x.status == SolveStatus::kOptimal &&
      (at_z.status != SolveStatus::kOptimal ||
       at_x.optimal_cost <= at_z.optimal_cost + 1e-9);
  if (pick_m1) {
    return assemble(state, x_k, ctx.base, ctx.k_gain, Mode::kM1, x_k, at_x,
                    s_reset);
  }
  if (at_z.status != SolveStatus::kOptimal) {
    throw BackupInfeasible(
        "smpc_c_step: Mode-2 resolve from z1(k-1) infeasible at step " +
        std::to_string(state.step));
  }
  return assemble(state, x_k, ctx.base, ctx.k_gain, Mode::kM2,
                  state.previous_predicted, at_z, s_prop);
}

}  // namespace smpc
