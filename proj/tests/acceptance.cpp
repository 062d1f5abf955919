// Acceptance gate: one criterion per invocation (argv[1] in 1..8), one
// PASS/FAIL line on stdout, non-zero exit on failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <smpc/config.hpp>
#include <smpc/qp.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using namespace smpc;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (cond ? " ok" : " FAILED");
  }
};

bool within(double value, double center, double tol) {
  return std::abs(value - center) <= tol;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

Polytope single_face(const ConstraintFace& face) {
  Matrix n(1, face.normal.size());
  n.row(0) = face.normal;
  Vector o(1);
  o << face.offset;
  return Polytope::make(n, o);
}

double post_burst_rate(const EnsembleResult& result, const Polytope& set,
                       int period) {
  long ok = 0, total = 0;
  for (const TrialRecord& trial : result.trials) {
    for (int k = period; k + 1 < static_cast<int>(trial.states.size());
         k += period) {
      ++total;
      if (set.contains(trial.states[k + 1])) ++ok;
    }
  }
  return total > 0 ? static_cast<double>(ok) / static_cast<double>(total)
                   : 1.0;
}

// --- criterion bodies ------------------------------------------------------

Check criterion_1() {
  Check c;
  Experiment exp = smpc::testing::di_experiment();
  const double hx = exp.state_half_widths.front();
  const double hu = exp.input_half_widths.front();
  c.require(within(hx, 0.95, 0.02), "state half-width " + num(hx) +
                                        " in 0.95±0.02");
  c.require(within(hu, 3.2, 0.1), "input half-width " + num(hu) +
                                      " in 3.2±0.1");
  return c;
}

Check criterion_2() {
  Check c;
  Experiment exp = smpc::testing::di_experiment("smpc-prs", 500, 10, 1);
  EnsembleResult result = run_ensemble(exp.sim);
  RateEstimate joint =
      empirical_satisfaction(result, exp.state_set_raw, 1, 10);
  c.require(joint.rate >= 0.60, "joint rate " + num(joint.rate) + " >= 0.60");
  c.require(within(joint.rate, 0.749, 0.05),
            "joint rate " + num(joint.rate) + " in 0.749±0.05");
  return c;
}

Check criterion_3() {
  Check c;
  Experiment exp = smpc::testing::di_experiment("smpc-c", 500, 10, 1);
  EnsembleResult result = run_ensemble(exp.sim);
  // The deceleration phase presses on the lower velocity face [x]₂ ≥ −1.2.
  RateEstimate lower = empirical_satisfaction(
      result, single_face(exp.config.state_faces[1]), 1, 10);
  RateEstimate joint =
      empirical_satisfaction(result, exp.state_set_raw, 1, 10);
  c.require(lower.rate < 0.80,
            "lower-face rate " + num(lower.rate) + " below 0.80 target");
  c.require(within(lower.rate, 0.766, 0.05),
            "lower-face rate " + num(lower.rate) + " in 0.766±0.05");
  c.require(within(joint.rate, 0.715, 0.06),
            "joint rate " + num(joint.rate) + " in 0.715±0.06");
  return c;
}

Check criterion_4() {
  Check c;
  Experiment prs =
      smpc::testing::di_experiment("smpc-prs", 500, 100, 1, true);
  EnsembleResult rp = run_ensemble(prs.sim);
  const double rate_prs = post_burst_rate(rp, prs.state_set_raw, 10);
  c.require(rate_prs >= 0.60,
            "post-burst rate " + num(rate_prs) + " >= 0.60");
  c.require(within(rate_prs, 0.72, 0.06),
            "post-burst rate " + num(rate_prs) + " in 0.72±0.06");

  Experiment base = smpc::testing::di_experiment("smpc-c", 500, 100, 1, true);
  EnsembleResult rc = run_ensemble(base.sim);
  const double rate_c = post_burst_rate(rc, base.state_set_raw, 10);
  c.require(within(rate_c, 0.32, 0.10),
            "baseline post-burst rate " + num(rate_c) + " in 0.32±0.10");
  return c;
}

Check criterion_5() {
  Check c;
  Experiment exp = smpc::testing::di_experiment("smpc-prs", 1000, 10, 1);
  EnsembleResult result = run_ensemble(exp.sim);

  // Per-step closed-loop containment at each face's level, and jointly in
  // the Gaussian ellipsoid at the state level.
  for (const ConstraintFace& face : exp.config.state_faces) {
    IntervalPrs prs =
        marginal_interval_prs(face.normal, exp.sigma_inf, face.level);
    double worst = 1.0;
    for (const RateEstimate& r : closed_loop_prs_check(result, prs)) {
      worst = std::min(
          worst, r.rate - (face.level - 3.0 * std::max(r.standard_error,
                                                       1e-9)));
    }
    c.require(worst >= 0.0, "face containment margin " + num(worst));
  }
  {
    EllipsoidPrs prs = gaussian_prs(exp.sigma_inf, 0.6, 2);
    double worst = 1.0;
    for (const RateEstimate& r : closed_loop_prs_check(result, prs)) {
      worst = std::min(worst, r.rate - (0.6 - 3.0 * std::max(
                                                  r.standard_error, 1e-9)));
    }
    c.require(worst >= 0.0, "joint containment margin " + num(worst));
  }

  // Nestedness: n-step half-widths grow monotonically to the stationary one.
  {
    const Matrix a_k = exp.config.a + exp.config.b * exp.k_gain;
    const RowVector dir = exp.config.state_faces.front().normal;
    bool nested = true;
    double prev = 0.0;
    for (const Matrix& sigma :
         propagate_variance(a_k, exp.config.w_cov, 25)) {
      const double hw = marginal_interval_prs(dir, sigma, 0.6).half_width;
      nested = nested && hw >= prev - 1e-12;
      prev = hw;
    }
    const double hw_inf =
        marginal_interval_prs(dir, exp.sigma_inf, 0.6).half_width;
    nested = nested && hw_inf >= prev - 1e-9;
    c.require(nested, "half-width nestedness");
  }

  // Shift dominance: the n-step variances are ordered (Σ_{n+1} − Σ_n PSD),
  // so containment levels transfer to all earlier steps.
  {
    const Matrix a_k = exp.config.a + exp.config.b * exp.k_gain;
    const auto vars = propagate_variance(a_k, exp.config.w_cov, 25);
    bool ordered = true;
    for (std::size_t i = 0; i + 1 < vars.size(); ++i) {
      ordered = ordered && min_eigenvalue(vars[i + 1] - vars[i]) >= -1e-10;
    }
    ordered = ordered &&
              min_eigenvalue(exp.sigma_inf - vars.back()) >= -1e-8;
    c.require(ordered, "variance shift dominance");
  }
  return c;
}

Check criterion_6() {
  Check c;
  Experiment exp = smpc::testing::di_experiment("smpc-prs", 200, 200, 1);
  EnsembleResult result = run_ensemble(exp.sim);

  CostBoundEstimate est;
  const Matrix a_k = exp.config.a + exp.config.b * exp.k_gain;
  est.certificate = lyapunov_certificate(a_k, 1.0);
  est.epsilon = 0.1;
  RngStream lip_rng(1, 0x11F5C817);
  est.lipschitz_c =
      estimate_lipschitz_c(exp.sim.problem, est.certificate, 400, lip_rng);
  RngStream w_rng(1, 0x30127F3);
  MonteCarloEstimate w_p =
      expected_p_norm(exp.sim.schedule.base, est.certificate, 100000, w_rng);

  CostBoundReport report = cost_bound_report(result, est, exp.sim, w_p);
  c.require(report.average_bound_holds,
            "average cost " + num(report.lhs_average) + " <= bound " +
                num(report.rhs_bound) + " + 3SE");
  c.require(report.decrease_holds,
            "per-step expected decrease (worst margin " +
                num(report.worst_decrease_margin) + ")");
  return c;
}

// Brute-force reference for small strictly convex QPs: enumerate active
// inequality subsets, solve the KKT system, keep the best feasible
// dual-sign-consistent candidate.
struct BruteForce {
  bool feasible = false;
  Vector x;
  double objective = 0.0;
};

BruteForce brute_force(const DenseQp& qp) {
  const int n = qp.vars();
  const int m = static_cast<int>(qp.bin.size());
  const int p = static_cast<int>(qp.beq.size());
  BruteForce best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> active;
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) active.push_back(i);
    }
    const int q = static_cast<int>(active.size());
    Matrix kkt = Matrix::Zero(n + p + q, n + p + q);
    Vector rhs(n + p + q);
    kkt.topLeftCorner(n, n) = qp.h;
    rhs.head(n) = -qp.g;
    if (p > 0) {
      kkt.block(0, n, n, p) = qp.aeq.transpose();
      kkt.block(n, 0, p, n) = qp.aeq;
      rhs.segment(n, p) = qp.beq;
    }
    for (int i = 0; i < q; ++i) {
      kkt.block(0, n + p + i, n, 1) = qp.ain.row(active[i]).transpose();
      kkt.block(n + p + i, 0, 1, n) = qp.ain.row(active[i]);
      rhs(n + p + i) = qp.bin(active[i]);
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    Vector sol = lu.solve(rhs);
    Vector x = sol.head(n);
    bool ok = true;
    for (int i = 0; i < m; ++i) {
      if (qp.ain.row(i) * x > qp.bin(i) + 1e-9) ok = false;
    }
    for (int i = 0; i < q; ++i) {
      if (sol(n + p + i) < -1e-9) ok = false;  // multiplier sign
    }
    if (!ok) continue;
    const double obj =
        0.5 * x.dot(qp.h * x) + qp.g.dot(x) + qp.c0;
    if (!best.feasible || obj < best.objective - 1e-12) {
      best.feasible = true;
      best.x = x;
      best.objective = obj;
    }
  }
  return best;
}

Check criterion_7() {
  Check c;
  RngStream rng(2024, 77);
  auto draw = [&](double lo, double hi) {
    return lo + (hi - lo) * rng.next_uniform();
  };
  int solved = 0, infeasible = 0;
  double worst_gap = 0.0, worst_kkt = 0.0, worst_farkas = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(draw(0, 19));  // up to 20 vars
    const int m = 3 + static_cast<int>(draw(0, 8));
    DenseQp qp;
    Matrix s(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) s(i, j) = draw(-1, 1);
    }
    qp.h = s.transpose() * s + 0.1 * Matrix::Identity(n, n);
    qp.g = Vector::NullaryExpr(n, [&](Eigen::Index) { return draw(-2, 2); });
    qp.ain = Matrix::NullaryExpr(
        m, n, [&](Eigen::Index, Eigen::Index) { return draw(-1, 1); });
    // Tight right-hand sides so a fair share of problems are infeasible.
    qp.bin = Vector::NullaryExpr(
        m, [&](Eigen::Index) { return draw(-1.6, 0.9); });
    qp.aeq = Matrix(0, n);
    qp.beq = Vector(0);

    QpResult result = solve_dense_qp(qp);
    BruteForce ref = brute_force(qp);
    if (result.status == QpStatus::kOptimal) {
      if (!ref.feasible) {
        c.require(false, "solver optimal where enumeration found nothing");
        continue;
      }
      ++solved;
      worst_gap = std::max(worst_gap,
                           std::abs(result.objective - ref.objective));
      worst_kkt = std::max(worst_kkt, kkt_residual(qp, result));
    } else {
      if (ref.feasible) {
        c.require(false, "solver infeasible where enumeration succeeded");
        continue;
      }
      ++infeasible;
      worst_farkas = std::max(worst_farkas, farkas_residual(qp, result));
    }
  }
  c.require(solved + infeasible == 100, "all 100 problems classified");
  c.require(solved >= 40 && infeasible >= 5,
            "mix of outcomes (" + std::to_string(solved) + " optimal, " +
                std::to_string(infeasible) + " infeasible)");
  c.require(worst_gap <= 1e-6,
            "objective gap vs enumeration " + num(worst_gap * 1e6) + "e-6");
  c.require(worst_kkt <= 1e-6, "KKT residual");
  c.require(worst_farkas <= 1e-7, "infeasibility certificates");

  // Linear-algebra residuals.
  {
    Matrix a(2, 2), w(2, 2);
    a << 0.9, 0.3, -0.2, 0.7;
    w << 1.0, 0.2, 0.2, 2.0;
    Matrix sigma = solve_discrete_lyapunov(a, w);
    const double res =
        (a * sigma * a.transpose() - sigma + w).cwiseAbs().maxCoeff();
    c.require(res <= 1e-10, "Lyapunov residual");
  }
  {
    Experiment exp = smpc::testing::di_experiment();
    const Matrix& p = exp.p_lqr;
    const Matrix& a = exp.config.a;
    const Matrix& b = exp.config.b;
    Matrix dare = a.transpose() * p * a - p -
                  a.transpose() * p * b *
                      (exp.config.r + b.transpose() * p * b).inverse() *
                      b.transpose() * p * a +
                  exp.config.q;
    c.require(dare.cwiseAbs().maxCoeff() <= 1e-8, "DARE residual");
  }
  {
    double worst = 0.0;
    for (double p = 0.02; p < 0.99; p += 0.07) {
      worst = std::max(worst, std::abs(normal_cdf(normal_quantile(p)) - p));
      for (int dof : {1, 2, 5}) {
        worst = std::max(worst,
                         std::abs(chi2_cdf(chi2_quantile(p, dof), dof) - p));
      }
    }
    c.require(worst <= 1e-8, "quantile round trips");
  }
  return c;
}

Check criterion_8() {
  Check c;
  const fs::path dir = fs::temp_directory_path() / "smpc_acceptance_c8";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config =
      std::string(SMPC_CONFIG_DIR) + "/double-integrator-prs.json";
  auto run_cli = [&](const std::string& out, int threads) {
    std::string cmd = std::string(SMPC_CLI_PATH) + " simulate --config " +
                      config + " --out " + (dir / out).string() +
                      " --trials 120 --steps 10 --threads " +
                      std::to_string(threads);
    int raw = std::system(cmd.c_str());
    return raw != -1 && WEXITSTATUS(raw) == 0;
  };
  auto slurp = [](const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  c.require(run_cli("t1", 1), "single-thread run");
  c.require(run_cli("t8", 8), "eight-thread run");
  const std::string csv1 = slurp(dir / "t1" / "trajectories.csv");
  c.require(!csv1.empty() && csv1 == slurp(dir / "t8" / "trajectories.csv"),
            "CSV byte-identical");
  c.require(slurp(dir / "t1" / "summary.json") ==
                slurp(dir / "t8" / "summary.json"),
            "JSON byte-identical");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..8>\n");
    return 2;
  }
  const int which = std::atoi(argv[1]);
  const Clock::time_point t0 = Clock::now();
  Check c;
  try {
    switch (which) {
      case 1: c = criterion_1(); break;
      case 2: c = criterion_2(); break;
      case 3: c = criterion_3(); break;
      case 4: c = criterion_4(); break;
      case 5: c = criterion_5(); break;
      case 6: c = criterion_6(); break;
      case 7: c = criterion_7(); break;
      case 8: c = criterion_8(); break;
      default:
        std::fprintf(stderr, "unknown criterion %d\n", which);
        return 2;
    }
  } catch (const std::exception& e) {
    std::printf("CRITERION %d: FAIL (exception: %s)\n", which, e.what());
    return 1;
  }
  const double elapsed = seconds_since(t0);
  const double budget[] = {0, 1, 120, 120, 180, 120, 180, 30, 120};
  if (elapsed > budget[which]) {
    c.require(false, "runtime " + num(elapsed) + "s within " +
                         num(budget[which]) + "s");
  }
  std::printf("CRITERION %d: %s (%.1fs; %s)\n", which,
              c.ok ? "PASS" : "FAIL", elapsed, c.detail.c_str());
  return c.ok ? 0 : 1;
}
