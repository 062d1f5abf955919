#pragma once

#include <cstdint>

#include "smpc/controller.hpp"
#include "smpc/uncertainty.hpp"

namespace smpc {

enum class Variant { kSmpcPrs, kSmpcC };

struct SimConfig {
  Variant variant = Variant::kSmpcPrs;
  // The (already tightened) nominal problem driven by smpc_prs_step.
  MpcProblem problem;
  // Rebuild context for the cost-conditioned variant; its `base` carries the
  // untightened sets. Ignored when variant == kSmpcPrs.
  SmpcCContext context;
  Matrix k_gain;
  DisturbanceSchedule schedule;
  Vector x0;
  int trials = 1;
  int steps = 1;
  std::uint64_t seed = 0;
  ControllerOptions options;
  int threads = 0;  // 0 → hardware concurrency
};

struct TrialRecord {
  std::vector<StepRecord> records;   // controller records, k = 0..T−1
  std::vector<Vector> states;        // realized x(0..T)
  std::vector<Vector> disturbances;  // w(0..T−1)
};

struct EnsembleResult {
  std::vector<TrialRecord> trials;
  long mode1_count = 0;
  long mode2_count = 0;
};

// One closed-loop trial: measure x(k) → controller step → apply u(k) →
// draw w(k) → advance. Disturbances come from a per-(trial, step) RNG
// sub-stream, so the result depends only on (seed, trial_id).
TrialRecord run_trial(const SimConfig& config, int trial_id);

// All trials, parallelized over a worker pool; output is identical for any
// thread count. Per-trial errors propagate after workers drain.
EnsembleResult run_ensemble(const SimConfig& config);

struct RateEstimate {
  double rate = 0.0;
  double lo = 0.0, hi = 0.0;  // 95% Wilson interval
  double standard_error = 0.0;
  long satisfied = 0;
  long total = 0;
};

// Fraction of (trial, step) pairs over k ∈ [first_step, last_step] with the
// realized x(k) — or u(k) when on_inputs — inside `set`.
RateEstimate empirical_satisfaction(const EnsembleResult& result,
                                    const Polytope& set, int first_step,
                                    int last_step, bool on_inputs = false);

// Per-step empirical Pr(e(k) ∈ prs) across trials.
std::vector<RateEstimate> closed_loop_prs_check(const EnsembleResult& result,
                                                const PrsSet& prs);

// Empirical Lipschitz-style constant: max over sampled feasible pairs
// (z, z + e) of (J*(z+e) − J*(z)) / ‖e‖_P. A lower estimate of the true
// constant, clamped to the sampled support.
double estimate_lipschitz_c(const MpcProblem& problem,
                            const Matrix& certificate, int samples,
                            RngStream& rng);

struct CostBoundEstimate {
  double lipschitz_c = 0.0;
  Matrix certificate;  // P
  double epsilon = 0.1;
  double lhs_running_average = 0.0;  // filled by cost_bound_report
  double rhs_bound = 0.0;            // C·E(‖w‖_P), filled likewise
};

struct CostBoundReport {
  double lhs_average = 0.0;
  double lhs_standard_error = 0.0;
  double rhs_bound = 0.0;
  double rhs_standard_error = 0.0;
  bool average_bound_holds = false;
  // max over steps of (mean ΔJ* − decrease bound) − 3·SE; ≤ 0 when the
  // per-step expected-decrease inequality holds everywhere.
  double worst_decrease_margin = 0.0;
  bool decrease_holds = false;
};

// Checks the asymptotic-average bound (running average of
// ‖z‖²_Q + ‖u‖²_R + εC‖e‖_P against C·E‖w‖_P) and the per-step expected
// decrease of the value function, both within 3 standard errors.
CostBoundReport cost_bound_report(const EnsembleResult& result,
                                  CostBoundEstimate& estimate,
                                  const SimConfig& config,
                                  const MonteCarloEstimate& w_p_norm);

}  // namespace smpc
