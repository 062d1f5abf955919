#include "smpc/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace smpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Active-set bookkeeping for the Goldfarb-Idnani method. Maintains
// J = L⁻ᵀ Q and the triangular factor R of the active-constraint normals in
// the H-metric, updated by Givens rotations as constraints enter and leave.
class GiWorkspace {
 public:
  explicit GiWorkspace(const Matrix& h) : n_(static_cast<int>(h.rows())) {
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) {
      throw DomainError("solve_dense_qp: Hessian not positive definite");
    }
    Matrix l = llt.matrixL();
    j_ = l.transpose()
             .triangularView<Eigen::Upper>()
             .solve(Matrix::Identity(n_, n_));
    r_ = Matrix::Zero(n_, n_);
  }

  int n() const { return n_; }
  int q() const { return q_; }
  const std::vector<int>& active() const { return active_; }

  // d = Jᵀ·normal; z = primal step direction; r = dual step direction.
  void directions(const Vector& normal, Vector& d, Vector& z, Vector& r) const {
    d = j_.transpose() * normal;
    z = j_.rightCols(n_ - q_) * d.tail(n_ - q_);
    r = r_.topLeftCorner(q_, q_)
            .triangularView<Eigen::Upper>()
            .solve(d.head(q_));
  }

  void add(int constraint_id, const Vector& d) {
    Vector dd = d;
    for (int k = n_ - 1; k > q_; --k) {
      double a = dd(k - 1), b = dd(k);
      double h = std::hypot(a, b);
      if (h == 0.0) continue;
      const double c = a / h, s = b / h;
      dd(k - 1) = h;
      dd(k) = 0.0;
      for (int row = 0; row < n_; ++row) {
        const double t1 = j_(row, k - 1), t2 = j_(row, k);
        j_(row, k - 1) = c * t1 + s * t2;
        j_(row, k) = -s * t1 + c * t2;
      }
    }
    r_.col(q_).head(q_ + 1) = dd.head(q_ + 1);
    active_.push_back(constraint_id);
    ++q_;
  }

  // Remove the active constraint at position `pos` and re-triangularize.
  void remove(int pos) {
    active_.erase(active_.begin() + pos);
    for (int col = pos; col < q_ - 1; ++col) {
      r_.col(col).head(q_) = r_.col(col + 1).head(q_);
    }
    r_.col(q_ - 1).setZero();
    --q_;
    for (int k = pos; k < q_; ++k) {
      double a = r_(k, k), b = r_(k + 1, k);
      double h = std::hypot(a, b);
      if (h == 0.0) continue;
      const double c = a / h, s = b / h;
      for (int col = k; col < q_; ++col) {
        const double t1 = r_(k, col), t2 = r_(k + 1, col);
        r_(k, col) = c * t1 + s * t2;
        r_(k + 1, col) = -s * t1 + c * t2;
      }
      for (int row = 0; row < n_; ++row) {
        const double t1 = j_(row, k), t2 = j_(row, k + 1);
        j_(row, k) = c * t1 + s * t2;
        j_(row, k + 1) = -s * t1 + c * t2;
      }
    }
  }

 private:
  int n_;
  int q_ = 0;
  Matrix j_, r_;
  std::vector<int> active_;
};

}  // namespace

// Internal constraint form is n_iᵀx ≥ b_i with ids [0,p) the equalities
// (normal = aeq row, b = beq) and ids [p,p+m) the inequalities
// (normal = −ain row, b = −bin).
QpResult solve_dense_qp(const DenseQp& qp) {
  const int n = qp.vars();
  const int p = static_cast<int>(qp.beq.size());
  const int m = static_cast<int>(qp.bin.size());
  if (qp.h.rows() != n || qp.h.cols() != n ||
      (p > 0 && qp.aeq.cols() != n) || (m > 0 && qp.ain.cols() != n)) {
    throw DomainError("solve_dense_qp: dimension mismatch");
  }

  GiWorkspace ws(qp.h);
  Vector x = -Eigen::LLT<Matrix>(qp.h).solve(qp.g);
  Vector u = Vector::Zero(n);  // duals aligned with ws.active()

  const double scale =
      std::max({1.0, qp.g.cwiseAbs().maxCoeff(),
                m > 0 ? qp.bin.cwiseAbs().maxCoeff() : 0.0,
                p > 0 ? qp.beq.cwiseAbs().maxCoeff() : 0.0});
  const double tol = 1e-11 * scale;

  QpResult res;
  const int iter_cap = 50 * (n + m + p + 10);

  auto bump_iterations = [&]() {
    if (++res.iterations > iter_cap) {
      throw IterationLimit("solve_dense_qp: active-set iteration cap reached");
    }
  };

  // Equality phase: activate each equality with a signed full step.
  for (int e = 0; e < p; ++e) {
    bump_iterations();
    Vector np = qp.aeq.row(e);
    const double s = np.dot(x) - qp.beq(e);
    Vector d, z, r;
    ws.directions(np, d, z, r);
    if (z.norm() <= 1e-12 * std::max(1.0, np.norm())) {
      if (std::fabs(s) <= tol) continue;  // dependent but consistent
      // Inconsistent equalities: aeq_e = Σ r_i aeq_i but beq differs.
      res.status = QpStatus::kInfeasible;
      res.farkas_eq = Vector::Zero(p);
      res.farkas_in = Vector::Zero(m);
      const double sigma = s > 0.0 ? 1.0 : -1.0;
      res.farkas_eq(e) = sigma;
      const auto& act = ws.active();
      for (int i = 0; i < ws.q(); ++i) res.farkas_eq(act[i]) = -sigma * r(i);
      res.x = x;
      return res;
    }
    const double t = -s / z.dot(np);
    x += t * z;
    u.head(ws.q()) -= t * r;
    ws.add(e, d);
    u(ws.q() - 1) = t;
  }

  // Inequality phase.
  while (true) {
    bump_iterations();
    int chosen = -1;
    double worst = -tol;
    for (int j = 0; j < m; ++j) {
      const double s = qp.bin(j) - qp.ain.row(j).dot(x);
      if (s < worst) {
        worst = s;
        chosen = j;
      }
    }
    if (chosen < 0) break;  // all satisfied: optimal

    Vector np = -qp.ain.row(chosen);
    const double b = -qp.bin(chosen);
    double u_plus = 0.0;

    while (true) {
      bump_iterations();
      Vector d, z, r;
      ws.directions(np, d, z, r);
      const bool z_zero = z.norm() <= 1e-12 * std::max(1.0, np.norm());

      double t1 = kInf;
      int drop = -1;
      const auto& act = ws.active();
      for (int i = 0; i < ws.q(); ++i) {
        if (act[i] < p) continue;  // equality duals are sign-free
        if (r(i) > 1e-13 && u(i) / r(i) < t1) {
          t1 = u(i) / r(i);
          drop = i;
        }
      }
      const double s = np.dot(x) - b;  // ≤ 0 while violated
      const double t2 = z_zero ? kInf : -s / z.dot(np);
      const double t = std::min(t1, t2);

      if (t >= kInf) {
        // No step possible: the chosen inequality is inconsistent with the
        // active set. λ_chosen = 1, λ_active = −r is a Farkas certificate.
        res.status = QpStatus::kInfeasible;
        res.farkas_eq = Vector::Zero(p);
        res.farkas_in = Vector::Zero(m);
        res.farkas_in(chosen) = 1.0;
        for (int i = 0; i < ws.q(); ++i) {
          if (act[i] < p) {
            res.farkas_eq(act[i]) += r(i);
          } else {
            res.farkas_in(act[i] - p) += -r(i);
          }
        }
        res.x = x;
        return res;
      }

      if (!z_zero) x += t * z;
      u.head(ws.q()) -= t * r;
      u_plus += t;

      if (t == t2) {
        ws.add(p + chosen, d);
        u(ws.q() - 1) = u_plus;
        break;
      }
      // Partial (or pure dual) step: drop the blocking inequality.
      ws.remove(drop);
      for (int i = drop; i < ws.q(); ++i) u(i) = u(i + 1);
      u(ws.q()) = 0.0;
    }
  }

  res.status = QpStatus::kOptimal;
  res.x = x;
  res.objective = 0.5 * x.dot(qp.h * x) + qp.g.dot(x) + qp.c0;
  res.eq_duals = Vector::Zero(p);
  res.in_duals = Vector::Zero(m);
  const auto& act = ws.active();
  for (int i = 0; i < ws.q(); ++i) {
    // Internal stationarity is Hx + g = Σ u_i n_i; map to the external
    // convention Hx + g + aeqᵀμ + ainᵀλ = 0.
    if (act[i] < p) {
      res.eq_duals(act[i]) = -u(i);
    } else {
      res.in_duals(act[i] - p) = u(i);
    }
  }
  return res;
}

double kkt_residual(const DenseQp& qp, const QpResult& result) {
  const int p = static_cast<int>(qp.beq.size());
  const int m = static_cast<int>(qp.bin.size());
  const Vector& x = result.x;

  Vector stat = qp.h * x + qp.g;
  if (p > 0) stat += qp.aeq.transpose() * result.eq_duals;
  if (m > 0) stat += qp.ain.transpose() * result.in_duals;
  double resid = stat.cwiseAbs().maxCoeff();

  if (p > 0) {
    resid = std::max(resid, (qp.aeq * x - qp.beq).cwiseAbs().maxCoeff());
  }
  if (m > 0) {
    Vector viol = qp.ain * x - qp.bin;
    resid = std::max(resid, viol.maxCoeff());
    resid = std::max(resid, -result.in_duals.minCoeff());
    resid = std::max(
        resid, (result.in_duals.array() * viol.array()).abs().maxCoeff());
  }
  return resid;
}

double farkas_residual(const DenseQp& qp, const QpResult& result,
                       double margin) {
  const int p = static_cast<int>(qp.beq.size());
  const int m = static_cast<int>(qp.bin.size());
  Vector comb = Vector::Zero(qp.vars());
  double value = 0.0;
  double resid = 0.0;
  if (m > 0) {
    comb += qp.ain.transpose() * result.farkas_in;
    value += qp.bin.dot(result.farkas_in);
    resid = std::max(resid, -result.farkas_in.minCoeff());
  }
  if (p > 0) {
    comb += qp.aeq.transpose() * result.farkas_eq;
    value += qp.beq.dot(result.farkas_eq);
  }
  resid = std::max(resid, comb.cwiseAbs().maxCoeff());
  resid = std::max(resid, value + margin);  // must be strictly negative
  return resid;
}

}  // namespace smpc
