#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smpc/simulator.hpp"

namespace smpc {

struct ConstraintFace {
  RowVector normal;
  double offset = 0.0;
  double level = 0.0;  // chance-constraint probability p for this face
};

// Parsed experiment document. Schema (all keys mandatory unless noted):
//   schema: 1
//   system: {A, B}
//   disturbance: {covariance, burst_covariance?, burst_period?}
//   constraints: {state: [face…], input: [face…]},
//     face = {normal, offset, level}
//   costs: {Q, R, terminal_mode: "origin"|"invariant"}
//   controller: {variant: "smpc-prs"|"smpc-c", horizon,
//                feasibility_tolerance?, epsilon?, mode2_apply_shifted?}
//   simulation: {trials, steps, x0, seed}
//   outputs: {directory, formats}
// Unknown keys anywhere are rejected.
struct ExperimentConfig {
  Matrix a, b;
  Matrix w_cov;
  std::optional<Matrix> burst_cov;
  int burst_period = 0;
  std::vector<ConstraintFace> state_faces, input_faces;
  Matrix q, r;
  std::string terminal_mode = "origin";
  std::string variant = "smpc-prs";
  int horizon = 1;
  double feasibility_tolerance = 1e-6;
  double epsilon = 0.1;
  bool mode2_apply_shifted = false;
  int trials = 1;
  int steps = 1;
  Vector x0;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> formats;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Everything derived from a config: gain, stationary variance, per-face
// reachable sets, tightened sets, and a ready-to-run SimConfig.
struct Experiment {
  ExperimentConfig config;
  Matrix k_gain;     // LQR feedback K
  Matrix p_lqr;      // DARE solution (terminal cost)
  Matrix sigma_inf;  // stationary error variance
  Polytope state_set_raw, input_set_raw;    // 𝒳, 𝒰
  Polytope state_set_tight, input_set_tight;  // 𝒵, 𝒱
  std::vector<double> state_half_widths, input_half_widths;
  SimConfig sim;
};

// Runs the offline pipeline: LQR gain → stationary variance → per-face
// marginal reachable sets → tightened constraint sets → controller setup.
// Throws EmptyTightening if any tightened face excludes the origin.
Experiment build_experiment(const ExperimentConfig& config);

}  // namespace smpc
