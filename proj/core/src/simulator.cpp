#include "smpc/simulator.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace smpc {

TrialRecord run_trial(const SimConfig& config, int trial_id) {
  const int nx = config.k_gain.cols();
  TrialRecord trial;
  trial.records.reserve(config.steps);
  trial.states.reserve(config.steps + 1);
  trial.disturbances.reserve(config.steps);

  ControllerState cs;
  cs.step = 0;
  cs.previous_predicted = config.x0;
  cs.variance = Matrix::Zero(nx, nx);

  Vector x = config.x0;
  trial.states.push_back(x);
  const RngStream base(config.seed, static_cast<std::uint64_t>(trial_id));
  const LinearSystem& sys = config.variant == Variant::kSmpcPrs
                                ? config.problem.system
                                : config.context.base.system;
  for (int k = 0; k < config.steps; ++k) {
    StepResult step =
        config.variant == Variant::kSmpcPrs
            ? smpc_prs_step(cs, x, config.problem, config.k_gain,
                            config.options)
            : smpc_c_step(cs, x, config.context, config.options);
    RngStream stream = base.substream(static_cast<std::uint64_t>(k));
    const Vector w = sample(config.schedule.model_at(k), stream);
    x = sys.a * x + sys.b * step.u + w;
    trial.records.push_back(std::move(step.record));
    trial.disturbances.push_back(w);
    trial.states.push_back(x);
    cs = std::move(step.next);
  }
  return trial;
}

EnsembleResult run_ensemble(const SimConfig& config) {
  if (config.trials < 1) throw DomainError("run_ensemble: trials < 1");
  EnsembleResult result;
  result.trials.resize(config.trials);

  int workers = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, config.trials);

  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  int first_error_trial = -1;

  auto work = [&]() {
    for (int t = next.fetch_add(1); t < config.trials;
         t = next.fetch_add(1)) {
      try {
        result.trials[t] = run_trial(config, t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error_trial < 0 || t < first_error_trial) {
          first_error_trial = t;
          first_error = std::current_exception();
        }
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const TrialRecord& trial : result.trials) {
    for (const StepRecord& rec : trial.records) {
      (rec.mode == Mode::kM1 ? result.mode1_count : result.mode2_count) += 1;
    }
  }
  return result;
}

namespace {

RateEstimate make_rate(long satisfied, long total) {
  RateEstimate est;
  est.satisfied = satisfied;
  est.total = total;
  if (total == 0) return est;
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(satisfied) / n;
  const double z = 1.959963984540054;  // 97.5% normal quantile
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  est.rate = p;
  est.lo = center - half;
  est.hi = center + half;
  est.standard_error = std::sqrt(p * (1.0 - p) / n);
  return est;
}

}  // namespace

RateEstimate empirical_satisfaction(const EnsembleResult& result,
                                    const Polytope& set, int first_step,
                                    int last_step, bool on_inputs) {
  long satisfied = 0, total = 0;
  for (const TrialRecord& trial : result.trials) {
    for (int k = first_step; k <= last_step; ++k) {
      const Vector* v = nullptr;
      if (on_inputs) {
        if (k < 0 || k >= static_cast<int>(trial.records.size())) continue;
        v = &trial.records[k].applied_input;
      } else {
        if (k < 0 || k >= static_cast<int>(trial.states.size())) continue;
        v = &trial.states[k];
      }
      ++total;
      if (set.contains(*v)) ++satisfied;
    }
  }
  return make_rate(satisfied, total);
}

std::vector<RateEstimate> closed_loop_prs_check(const EnsembleResult& result,
                                                const PrsSet& prs) {
  if (result.trials.empty()) return {};
  const int steps = static_cast<int>(result.trials.front().records.size());
  std::vector<RateEstimate> rates(steps);
  for (int k = 0; k < steps; ++k) {
    long satisfied = 0, total = 0;
    for (const TrialRecord& trial : result.trials) {
      ++total;
      if (prs_contains(prs, trial.records[k].error)) ++satisfied;
    }
    rates[k] = make_rate(satisfied, total);
  }
  return rates;
}

double estimate_lipschitz_c(const MpcProblem& problem,
                            const Matrix& certificate, int samples,
                            RngStream& rng) {
  require_symmetric_psd(certificate, "certificate P");
  const auto [lo, hi] = feasible_initial_box(problem);
  const int nx = problem.system.nx();
  const double scale = (hi - lo).norm();
  if (scale <= 1e-12) return 0.0;  // feasible set degenerates to a point

  double c = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector z(nx);
    for (int i = 0; i < nx; ++i) {
      z(i) = lo(i) + (hi(i) - lo(i)) * rng.next_uniform();
    }
    const QpSolution at_z = solve_qp(problem, z);
    if (at_z.status != SolveStatus::kOptimal) continue;
    Vector e(nx);
    for (int i = 0; i < nx; ++i) e(i) = rng.next_normal();
    e *= 0.05 * scale * rng.next_uniform() / std::max(e.norm(), 1e-300);
    const double p_norm = std::sqrt(
        std::max(0.0, static_cast<double>(e.dot(certificate * e))));
    if (p_norm <= 1e-12) continue;
    const QpSolution at_ze = solve_qp(problem, z + e);
    if (at_ze.status != SolveStatus::kOptimal) continue;
    c = std::max(c, (at_ze.optimal_cost - at_z.optimal_cost) / p_norm);
  }
  return c;
}

CostBoundReport cost_bound_report(const EnsembleResult& result,
                                  CostBoundEstimate& estimate,
                                  const SimConfig& config,
                                  const MonteCarloEstimate& w_p_norm) {
  const Matrix& q = config.variant == Variant::kSmpcPrs
                        ? config.problem.stage_state_cost
                        : config.context.base.stage_state_cost;
  const Matrix& r = config.variant == Variant::kSmpcPrs
                        ? config.problem.stage_input_cost
                        : config.context.base.stage_input_cost;
  const double c = estimate.lipschitz_c;
  const double eps = estimate.epsilon;
  const Matrix& p = estimate.certificate;

  CostBoundReport report;
  // Running-average side: pooled mean of ℓ(k) = ‖z‖²_Q + ‖u‖²_R + εC‖e‖_P.
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (const TrialRecord& trial : result.trials) {
    for (const StepRecord& rec : trial.records) {
      const double e_p = std::sqrt(std::max(
          0.0, static_cast<double>(rec.error.dot(p * rec.error))));
      const double term = rec.nominal_state.dot(q * rec.nominal_state) +
                          rec.applied_input.dot(r * rec.applied_input) +
                          eps * c * e_p;
      sum += term;
      sum_sq += term * term;
      ++count;
    }
  }
  if (count > 1) {
    report.lhs_average = sum / static_cast<double>(count);
    const double var =
        (sum_sq - sum * sum / static_cast<double>(count)) /
        static_cast<double>(count - 1);
    report.lhs_standard_error =
        std::sqrt(std::max(0.0, var) / static_cast<double>(count));
  }
  report.rhs_bound = c * w_p_norm.value;
  report.rhs_standard_error = c * w_p_norm.standard_error;
  const double pooled_se = std::hypot(report.lhs_standard_error,
                                      report.rhs_standard_error);
  report.average_bound_holds =
      report.lhs_average <= report.rhs_bound + 3.0 * pooled_se;
  estimate.lhs_running_average = report.lhs_average;
  estimate.rhs_bound = report.rhs_bound;

  // Per-step expected decrease: mean ΔJ*(k) ≤ mean of
  // −(‖z‖²_Q + ‖v‖²_R + εC‖e‖_P) + C·E‖w‖_P, within 3 SE of the difference.
  const int steps = result.trials.empty()
                        ? 0
                        : static_cast<int>(result.trials.front().records.size());
  report.worst_decrease_margin = -std::numeric_limits<double>::infinity();
  for (int k = 0; k + 1 < steps; ++k) {
    double d_sum = 0.0, d_sq = 0.0;
    long n = 0;
    for (const TrialRecord& trial : result.trials) {
      const StepRecord& rec = trial.records[k];
      const double e_p = std::sqrt(std::max(
          0.0, static_cast<double>(rec.error.dot(p * rec.error))));
      const double decrease = rec.nominal_state.dot(q * rec.nominal_state) +
                              rec.nominal_input.dot(r * rec.nominal_input) +
                              eps * c * e_p;
      const double diff = trial.records[k + 1].optimal_cost -
                          rec.optimal_cost + decrease;
      d_sum += diff;
      d_sq += diff * diff;
      ++n;
    }
    if (n < 2) continue;
    const double mean = d_sum / static_cast<double>(n);
    const double var = (d_sq - d_sum * d_sum / static_cast<double>(n)) /
                       static_cast<double>(n - 1);
    const double se = std::hypot(
        std::sqrt(std::max(0.0, var) / static_cast<double>(n)),
        report.rhs_standard_error);
    const double margin = mean - c * w_p_norm.value - 3.0 * se;
    report.worst_decrease_margin =
        std::max(report.worst_decrease_margin, margin);
  }
  report.decrease_holds = report.worst_decrease_margin <= 0.0;
  return report;
}

}  // namespace smpc
