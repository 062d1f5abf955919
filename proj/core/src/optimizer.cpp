#include "smpc/optimizer.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace smpc {

namespace {

// Powers Phi[i] = A^i and input maps G[i] (nx × N·nu) with z_i = Phi[i] z0 +
// G[i] V. G[0] is the zero map.
struct Prediction {
  std::vector<Matrix> phi;
  std::vector<Matrix> g;
};

Prediction predict(const LinearSystem& sys, int n) {
  const int nx = sys.nx(), nu = sys.nu();
  Prediction p;
  p.phi.resize(n + 1);
  p.g.resize(n + 1);
  p.phi[0] = Matrix::Identity(nx, nx);
  p.g[0] = Matrix::Zero(nx, n * nu);
  for (int i = 1; i <= n; ++i) {
    p.phi[i] = sys.a * p.phi[i - 1];
    p.g[i] = sys.a * p.g[i - 1];
    p.g[i].middleCols((i - 1) * nu, nu) = sys.b;
  }
  return p;
}

struct Rows {
  std::vector<RowVector> a;
  std::vector<double> b;

  void push(const RowVector& row, double rhs) {
    a.push_back(row);
    b.push_back(rhs);
  }
  Matrix matrix(int cols) const {
    Matrix m(static_cast<int>(a.size()), cols);
    for (int i = 0; i < m.rows(); ++i) m.row(i) = a[i];
    return m;
  }
  Vector vector() const {
    return Eigen::Map<const Vector>(b.data(), static_cast<long>(b.size()));
  }
};

}  // namespace

void validate_problem(const MpcProblem& problem) {
  const int nx = problem.system.nx(), nu = problem.system.nu();
  if (problem.system.a.cols() != nx || problem.system.b.rows() != nx) {
    throw DomainError("MpcProblem: system dimension mismatch");
  }
  if (problem.horizon < 1) throw DomainError("MpcProblem: horizon < 1");
  require_symmetric_psd(problem.stage_state_cost, "Q");
  require_symmetric_psd(problem.stage_input_cost, "R");
  require_symmetric_psd(problem.terminal_cost, "Q_f");
  if (problem.stage_state_cost.rows() != nx ||
      problem.stage_input_cost.rows() != nu ||
      problem.terminal_cost.rows() != nx) {
    throw DomainError("MpcProblem: cost dimension mismatch");
  }
  if (Eigen::LLT<Matrix>(problem.stage_input_cost).info() != Eigen::Success) {
    throw DomainError("MpcProblem: R must be positive definite");
  }
  if (!problem.stage_state_sets.empty() &&
      static_cast<int>(problem.stage_state_sets.size()) != problem.horizon) {
    throw DomainError("MpcProblem: stage_state_sets must have length N");
  }
  if (!problem.stage_input_sets.empty() &&
      static_cast<int>(problem.stage_input_sets.size()) != problem.horizon) {
    throw DomainError("MpcProblem: stage_input_sets must have length N");
  }
}

DenseQp build_qp(const MpcProblem& problem, const Vector& z0) {
  validate_problem(problem);
  const int nx = problem.system.nx(), nu = problem.system.nu();
  const int n = problem.horizon;
  if (z0.size() != nx) throw DomainError("build_qp: z0 dimension mismatch");
  const int nv = n * nu;
  const Prediction pred = predict(problem.system, n);

  DenseQp qp;
  qp.h = Matrix::Zero(nv, nv);
  qp.g = Vector::Zero(nv);
  qp.c0 = z0.dot(problem.stage_state_cost * z0);
  for (int j = 0; j < n; ++j) {
    qp.h.block(j * nu, j * nu, nu, nu) += 2.0 * problem.stage_input_cost;
  }
  for (int i = 1; i <= n; ++i) {
    const Matrix& qi =
        i == n ? problem.terminal_cost : problem.stage_state_cost;
    qp.h += 2.0 * pred.g[i].transpose() * qi * pred.g[i];
    const Vector zi_free = pred.phi[i] * z0;
    qp.g += 2.0 * pred.g[i].transpose() * (qi * zi_free);
    qp.c0 += zi_free.dot(qi * zi_free);
  }

  Rows in, eq;
  // Stage state rows; stage 0 has no decision dependence — constant rows
  // carry the membership test through the solver's certificate path.
  for (int i = 0; i < n; ++i) {
    const Polytope& set = problem.state_set_at(i);
    const Vector slack = set.offsets - set.normals * (pred.phi[i] * z0);
    for (int f = 0; f < set.faces(); ++f) {
      in.push(i == 0 ? RowVector::Zero(nv).eval()
                     : (set.normals.row(f) * pred.g[i]).eval(),
              slack(f));
    }
  }
  for (int j = 0; j < n; ++j) {
    const Polytope& set = problem.input_set_at(j);
    for (int f = 0; f < set.faces(); ++f) {
      RowVector row = RowVector::Zero(nv);
      row.segment(j * nu, nu) = set.normals.row(f);
      in.push(row, set.offsets(f));
    }
  }
  // Terminal faces: opposing ±a pairs with b_i + b_j ≈ 0 collapse into
  // equalities (this is how 𝒵_f = {0} is encoded).
  {
    const Polytope& tf = problem.terminal_set;
    const Vector slack = tf.offsets - tf.normals * (pred.phi[n] * z0);
    std::vector<bool> used(tf.faces(), false);
    for (int f = 0; f < tf.faces(); ++f) {
      if (used[f]) continue;
      int mate = -1;
      for (int h = f + 1; h < tf.faces(); ++h) {
        if (used[h]) continue;
        if ((tf.normals.row(f) + tf.normals.row(h)).norm() <=
                1e-12 * (1.0 + tf.normals.row(f).norm()) &&
            std::fabs(tf.offsets(f) + tf.offsets(h)) <= 1e-12) {
          mate = h;
          break;
        }
      }
      if (mate >= 0) {
        used[f] = used[mate] = true;
        eq.push(tf.normals.row(f) * pred.g[n], slack(f));
      } else {
        in.push(tf.normals.row(f) * pred.g[n], slack(f));
      }
    }
  }
  qp.ain = in.matrix(nv);
  qp.bin = in.vector();
  qp.aeq = eq.matrix(nv);
  qp.beq = eq.vector();
  return qp;
}

QpSolution solve_qp(const MpcProblem& problem, const Vector& z0) {
  const DenseQp qp = build_qp(problem, z0);
  const QpResult raw = solve_dense_qp(qp);
  QpSolution sol;
  if (raw.status == QpStatus::kInfeasible) {
    sol.status = SolveStatus::kInfeasible;
    return sol;
  }
  sol.status = SolveStatus::kOptimal;
  sol.optimal_cost = raw.objective;
  const int n = problem.horizon, nu = problem.system.nu();
  sol.nominal_inputs.resize(n);
  for (int j = 0; j < n; ++j) {
    sol.nominal_inputs[j] = raw.x.segment(j * nu, nu);
  }
  sol.nominal_states.resize(n + 1);
  sol.nominal_states[0] = z0;
  for (int i = 0; i < n; ++i) {
    sol.nominal_states[i + 1] = problem.system.a * sol.nominal_states[i] +
                                problem.system.b * sol.nominal_inputs[i];
  }
  return sol;
}

bool is_feasible(const MpcProblem& problem, const Vector& z0) {
  const DenseQp qp = build_qp(problem, z0);
  DenseLp lp;
  lp.c = Vector::Zero(qp.vars());
  lp.ain = qp.ain;
  lp.bin = qp.bin;
  lp.aeq = qp.aeq;
  lp.beq = qp.beq;
  return solve_dense_lp(lp).status == LpStatus::kOptimal;
}

Matrix terminal_cost_from_lqr(const LinearSystem& system, const Matrix& q,
                              const Matrix& r) {
  return lqr_gain(system.a, system.b, q, r).second;
}

namespace {

// max rowᵀz over the polytope; used for the redundancy test.
bool row_redundant(const Polytope& set, const RowVector& row, double rhs) {
  DenseLp lp;
  lp.c = row.transpose();
  lp.ain = set.normals;
  lp.bin = set.offsets;
  lp.aeq = Matrix(0, set.dim());
  lp.beq = Vector(0);
  LpResult res = solve_dense_lp(lp);
  if (res.status == LpStatus::kUnbounded) return false;
  if (res.status == LpStatus::kInfeasible) return true;  // empty set
  return res.objective <= rhs + 1e-8;
}

}  // namespace

Polytope maximal_invariant_terminal_set(const Matrix& a_k,
                                        const Polytope& state_set,
                                        const Polytope& input_rows_for_k) {
  if (spectral_radius(a_k) >= 1.0) {
    throw DomainError("maximal_invariant_terminal_set: a_k not stable");
  }
  Matrix base_n(state_set.faces() + input_rows_for_k.faces(), state_set.dim());
  Vector base_b(base_n.rows());
  base_n << state_set.normals, input_rows_for_k.normals;
  base_b << state_set.offsets, input_rows_for_k.offsets;

  Matrix cur_n = base_n;
  Vector cur_b = base_b;
  Matrix power = a_k;  // a_k^{t+1} applied to the base rows
  for (int t = 0; t < 500; ++t) {
    Polytope cur = Polytope::make(cur_n, cur_b);
    Rows fresh;
    for (int f = 0; f < base_n.rows(); ++f) {
      const RowVector row = base_n.row(f) * power;
      if (!row_redundant(cur, row, base_b(f))) fresh.push(row, base_b(f));
    }
    if (fresh.a.empty()) return cur;
    const int old = static_cast<int>(cur_n.rows());
    const int add = static_cast<int>(fresh.a.size());
    cur_n.conservativeResize(old + add, Eigen::NoChange);
    cur_b.conservativeResize(old + add);
    cur_n.bottomRows(add) = fresh.matrix(state_set.dim());
    cur_b.tail(add) = fresh.vector();
    power = power * a_k;
  }
  throw IterationLimit(
      "maximal_invariant_terminal_set: not finitely determined in 500 "
      "iterations");
}

std::pair<Vector, Vector> feasible_initial_box(const MpcProblem& problem) {
  validate_problem(problem);
  const int nx = problem.system.nx(), nu = problem.system.nu();
  const int n = problem.horizon, nv = n * nu;
  const Prediction pred = predict(problem.system, n);

  // Joint polytope over (z0, V): the same rows as build_qp, with the z0
  // dependence kept symbolic.
  Rows in;
  const int vars = nx + nv;
  auto stage_row = [&](int i, const RowVector& normal, double offset) {
    RowVector row(vars);
    row.head(nx) = normal * pred.phi[i];
    row.tail(nv) = normal * pred.g[i];
    return std::make_pair(row, offset);
  };
  for (int i = 0; i < n; ++i) {
    const Polytope& set = problem.state_set_at(i);
    for (int f = 0; f < set.faces(); ++f) {
      auto [row, rhs] = stage_row(i, set.normals.row(f), set.offsets(f));
      in.push(row, rhs);
    }
  }
  for (int j = 0; j < n; ++j) {
    const Polytope& set = problem.input_set_at(j);
    for (int f = 0; f < set.faces(); ++f) {
      RowVector row = RowVector::Zero(vars);
      row.segment(nx + j * nu, nu) = set.normals.row(f);
      in.push(row, set.offsets(f));
    }
  }
  for (int f = 0; f < problem.terminal_set.faces(); ++f) {
    auto [row, rhs] = stage_row(n, problem.terminal_set.normals.row(f),
                                problem.terminal_set.offsets(f));
    in.push(row, rhs);
  }

  DenseLp lp;
  lp.ain = in.matrix(vars);
  lp.bin = in.vector();
  lp.aeq = Matrix(0, vars);
  lp.beq = Vector(0);
  Vector lo(nx), hi(nx);
  for (int i = 0; i < nx; ++i) {
    for (const double sign : {1.0, -1.0}) {
      lp.c = Vector::Zero(vars);
      lp.c(i) = sign;
      LpResult res = solve_dense_lp(lp);
      if (res.status == LpStatus::kUnbounded) {
        throw Unbounded("feasible_initial_box: feasible set unbounded");
      }
      if (res.status == LpStatus::kInfeasible) {
        throw DomainError("feasible_initial_box: empty feasible set");
      }
      (sign > 0 ? hi : lo)(i) = res.objective * sign;
    }
  }
  return {lo, hi};
}

}  // namespace smpc
