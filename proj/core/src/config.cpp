#include "smpc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace smpc {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!required.count(key) && !optional.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) {
      throw ConfigError(where + ": missing key '" + key + "'");
    }
  }
}

Matrix parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ConfigError(where + ": expected an array of rows");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.front().size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) {
      throw ConfigError(where + ": ragged rows");
    }
    for (int c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw ConfigError(where + ": non-numeric");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

Vector parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": non-numeric");
    v(i) = j[i].get<double>();
  }
  return v;
}

std::vector<ConstraintFace> parse_faces(const json& j,
                                        const std::string& where, int dim) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<ConstraintFace> faces;
  for (const json& f : j) {
    require_keys(f, where, {"normal", "offset", "level"});
    ConstraintFace face;
    face.normal = parse_vector(f["normal"], where + ".normal").transpose();
    if (face.normal.size() != dim) {
      throw ConfigError(where + ": normal dimension mismatch");
    }
    face.offset = f["offset"].get<double>();
    face.level = f["level"].get<double>();
    if (face.offset < 0.0) throw ConfigError(where + ": offset < 0");
    if (face.level <= 0.0 || face.level >= 1.0) {
      throw ConfigError(where + ": level outside (0,1)");
    }
    faces.push_back(std::move(face));
  }
  if (faces.empty()) throw ConfigError(where + ": at least one face");
  return faces;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require_keys(doc, "config",
               {"schema", "system", "disturbance", "constraints", "costs",
                "controller", "simulation", "outputs"});
  if (!doc["schema"].is_number_integer() || doc["schema"].get<int>() != 1) {
    throw ConfigError("config: schema must be 1");
  }

  ExperimentConfig cfg;
  const json& sys = doc["system"];
  require_keys(sys, "system", {"A", "B"});
  cfg.a = parse_matrix(sys["A"], "system.A");
  cfg.b = parse_matrix(sys["B"], "system.B");
  const int nx = static_cast<int>(cfg.a.rows());
  const int nu = static_cast<int>(cfg.b.cols());
  if (cfg.a.cols() != nx || cfg.b.rows() != nx) {
    throw ConfigError("system: A must be square and B conformable");
  }

  const json& dist = doc["disturbance"];
  require_keys(dist, "disturbance", {"covariance"},
               {"burst_covariance", "burst_period"});
  cfg.w_cov = parse_matrix(dist["covariance"], "disturbance.covariance");
  if (cfg.w_cov.rows() != nx || cfg.w_cov.cols() != nx) {
    throw ConfigError("disturbance.covariance: dimension mismatch");
  }
  if (dist.contains("burst_covariance") != dist.contains("burst_period")) {
    throw ConfigError(
        "disturbance: burst_covariance and burst_period come together");
  }
  if (dist.contains("burst_covariance")) {
    cfg.burst_cov =
        parse_matrix(dist["burst_covariance"], "disturbance.burst_covariance");
    if (cfg.burst_cov->rows() != nx || cfg.burst_cov->cols() != nx) {
      throw ConfigError("disturbance.burst_covariance: dimension mismatch");
    }
    cfg.burst_period = dist["burst_period"].get<int>();
    if (cfg.burst_period < 1) {
      throw ConfigError("disturbance.burst_period: must be >= 1");
    }
  }

  const json& cons = doc["constraints"];
  require_keys(cons, "constraints", {"state", "input"});
  cfg.state_faces = parse_faces(cons["state"], "constraints.state", nx);
  cfg.input_faces = parse_faces(cons["input"], "constraints.input", nu);

  const json& costs = doc["costs"];
  require_keys(costs, "costs", {"Q", "R", "terminal_mode"});
  cfg.q = parse_matrix(costs["Q"], "costs.Q");
  cfg.r = parse_matrix(costs["R"], "costs.R");
  cfg.terminal_mode = costs["terminal_mode"].get<std::string>();
  if (cfg.terminal_mode != "origin" && cfg.terminal_mode != "invariant") {
    throw ConfigError("costs.terminal_mode: 'origin' or 'invariant'");
  }
  if (cfg.q.rows() != nx || cfg.q.cols() != nx || cfg.r.rows() != nu ||
      cfg.r.cols() != nu) {
    throw ConfigError("costs: dimension mismatch");
  }

  const json& ctrl = doc["controller"];
  require_keys(ctrl, "controller", {"variant", "horizon"},
               {"feasibility_tolerance", "epsilon", "mode2_apply_shifted"});
  cfg.variant = ctrl["variant"].get<std::string>();
  if (cfg.variant != "smpc-prs" && cfg.variant != "smpc-c") {
    throw ConfigError("controller.variant: 'smpc-prs' or 'smpc-c'");
  }
  cfg.horizon = ctrl["horizon"].get<int>();
  if (cfg.horizon < 1) throw ConfigError("controller.horizon: must be >= 1");
  if (ctrl.contains("feasibility_tolerance")) {
    cfg.feasibility_tolerance = ctrl["feasibility_tolerance"].get<double>();
  }
  if (ctrl.contains("epsilon")) cfg.epsilon = ctrl["epsilon"].get<double>();
  if (ctrl.contains("mode2_apply_shifted")) {
    cfg.mode2_apply_shifted = ctrl["mode2_apply_shifted"].get<bool>();
  }
  if (cfg.epsilon <= 0.0) throw ConfigError("controller.epsilon: must be > 0");

  const json& sim = doc["simulation"];
  require_keys(sim, "simulation", {"trials", "steps", "x0", "seed"});
  cfg.trials = sim["trials"].get<int>();
  cfg.steps = sim["steps"].get<int>();
  cfg.x0 = parse_vector(sim["x0"], "simulation.x0");
  cfg.seed = sim["seed"].get<std::uint64_t>();
  if (cfg.trials < 1 || cfg.steps < 1) {
    throw ConfigError("simulation: trials and steps must be >= 1");
  }
  if (cfg.x0.size() != nx) throw ConfigError("simulation.x0: dimension");

  const json& out = doc["outputs"];
  require_keys(out, "outputs", {"directory", "formats"});
  cfg.out_dir = out["directory"].get<std::string>();
  for (const json& f : out["formats"]) {
    const std::string fmt = f.get<std::string>();
    if (fmt != "csv" && fmt != "json") {
      throw ConfigError("outputs.formats: 'csv' or 'json'");
    }
    cfg.formats.push_back(fmt);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

Polytope faces_to_polytope(const std::vector<ConstraintFace>& faces, int dim) {
  Matrix normals(static_cast<int>(faces.size()), dim);
  Vector offsets(static_cast<int>(faces.size()));
  for (int f = 0; f < normals.rows(); ++f) {
    normals.row(f) = faces[f].normal;
    offsets(f) = faces[f].offset;
  }
  return Polytope::make(std::move(normals), std::move(offsets));
}

Polytope origin_terminal_set(int nx) {
  Matrix normals(2 * nx, nx);
  normals << Matrix::Identity(nx, nx), -Matrix::Identity(nx, nx);
  return Polytope::make(std::move(normals), Vector::Zero(2 * nx));
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& config) {
  Experiment exp;
  exp.config = config;
  const int nx = static_cast<int>(config.a.rows());
  const int nu = static_cast<int>(config.b.cols());

  auto [k_gain, p_lqr] = lqr_gain(config.a, config.b, config.q, config.r);
  exp.k_gain = k_gain;
  exp.p_lqr = p_lqr;
  const Matrix a_k = config.a + config.b * k_gain;
  exp.sigma_inf = solve_discrete_lyapunov(a_k, config.w_cov);

  exp.state_set_raw = faces_to_polytope(config.state_faces, nx);
  exp.input_set_raw = faces_to_polytope(config.input_faces, nu);

  // Per-face marginal reachable sets from the stationary error variance;
  // input faces see the error through the feedback gain.
  std::vector<PrsSet> state_prs, input_prs;
  for (const ConstraintFace& face : config.state_faces) {
    IntervalPrs prs = marginal_interval_prs(face.normal, exp.sigma_inf,
                                            face.level);
    exp.state_half_widths.push_back(prs.half_width);
    state_prs.emplace_back(std::move(prs));
  }
  const Matrix sigma_u = k_gain * exp.sigma_inf * k_gain.transpose();
  for (const ConstraintFace& face : config.input_faces) {
    IntervalPrs prs = marginal_interval_prs(face.normal, sigma_u, face.level);
    exp.input_half_widths.push_back(prs.half_width);
    input_prs.emplace_back(std::move(prs));
  }
  exp.state_set_tight = pontryagin_tighten(exp.state_set_raw, state_prs);
  exp.input_set_tight = pontryagin_tighten(exp.input_set_raw, input_prs);

  // Shared problem skeleton.
  MpcProblem problem;
  problem.system = LinearSystem{config.a, config.b};
  problem.horizon = config.horizon;
  problem.stage_state_cost = config.q;
  problem.stage_input_cost = config.r;
  problem.terminal_cost = p_lqr;
  if (config.terminal_mode == "origin") {
    problem.terminal_set = origin_terminal_set(nx);
  } else {
    Polytope input_rows = Polytope::make(
        exp.input_set_tight.normals * k_gain, exp.input_set_tight.offsets);
    problem.terminal_set = maximal_invariant_terminal_set(
        a_k, exp.state_set_tight, input_rows);
  }

  SimConfig sim;
  sim.k_gain = k_gain;
  sim.x0 = config.x0;
  sim.trials = config.trials;
  sim.steps = config.steps;
  sim.seed = config.seed;
  sim.options.feasibility_tol = config.feasibility_tolerance;
  sim.options.mode2_apply_shifted = config.mode2_apply_shifted;
  sim.schedule.base =
      GaussianDisturbance::make(Vector::Zero(nx), config.w_cov);
  if (config.burst_cov) {
    sim.schedule.burst =
        GaussianDisturbance::make(Vector::Zero(nx), *config.burst_cov);
    sim.schedule.burst_period = config.burst_period;
  }

  if (config.variant == "smpc-prs") {
    sim.variant = Variant::kSmpcPrs;
    problem.state_set = exp.state_set_tight;
    problem.input_set = exp.input_set_tight;
    sim.problem = problem;
  } else {
    sim.variant = Variant::kSmpcC;
    problem.state_set = exp.state_set_raw;
    problem.input_set = exp.input_set_raw;
    SmpcCContext ctx;
    ctx.base = problem;
    ctx.k_gain = k_gain;
    ctx.w_cov = config.w_cov;
    // One-sided per-face satisfaction levels via the union-bound split of
    // each face's two-sided probability.
    for (const ConstraintFace& face : config.state_faces) {
      ctx.state_face_levels.push_back(0.5 * (1.0 + face.level));
    }
    for (const ConstraintFace& face : config.input_faces) {
      ctx.input_face_levels.push_back(0.5 * (1.0 + face.level));
    }
    sim.context = std::move(ctx);
    sim.problem = problem;  // kept for introspection; stepper uses context
  }
  exp.sim = std::move(sim);
  return exp;
}

}  // namespace smpc
