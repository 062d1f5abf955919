#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <smpc/config.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smpc;

namespace {

// Exit codes are part of the interface.
constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kEmptyTightening = 2;
constexpr int kInitialInfeasible = 3;
constexpr int kConfigMismatch = 4;
constexpr int kValidationFailed = 5;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// All artifacts are written to a temp file in the target directory and
// renamed into place, so readers never see a partial file.
void atomic_write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json polytope_json(const Polytope& p) {
  return json{{"normals", matrix_json(p.normals)},
              {"offsets", vector_json(p.offsets)}};
}

json rate_json(const RateEstimate& r) {
  return json{{"rate", r.rate},           {"wilson_lo", r.lo},
              {"wilson_hi", r.hi},        {"standard_error", r.standard_error},
              {"satisfied", r.satisfied}, {"total", r.total}};
}

struct CliOverrides {
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  int steps = 0;
  int threads = 0;
};

ExperimentConfig load_with_overrides(const std::string& path,
                                     const CliOverrides& ov) {
  ExperimentConfig cfg = load_config(path);
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (ov.seed_set) cfg.seed = ov.seed;
  if (ov.trials > 0) cfg.trials = ov.trials;
  if (ov.steps > 0) cfg.steps = ov.steps;
  return cfg;
}

json config_echo(const ExperimentConfig& cfg) {
  json j{{"variant", cfg.variant},   {"horizon", cfg.horizon},
         {"trials", cfg.trials},     {"steps", cfg.steps},
         {"seed", cfg.seed},         {"x0", vector_json(cfg.x0)},
         {"epsilon", cfg.epsilon},
         {"feasibility_tolerance", cfg.feasibility_tolerance},
         {"terminal_mode", cfg.terminal_mode},
         {"burst_period", cfg.burst_period}};
  return j;
}

int cmd_prs(const ExperimentConfig& cfg) {
  Experiment exp;
  try {
    exp = build_experiment(cfg);
  } catch (const EmptyTightening& e) {
    std::fprintf(stderr, "empty tightening on face %d: %s\n", e.face,
                 e.what());
    return kEmptyTightening;
  }
  json out{{"schema", 1},
           {"k_gain", matrix_json(exp.k_gain)},
           {"p_lqr", matrix_json(exp.p_lqr)},
           {"sigma_inf", matrix_json(exp.sigma_inf)},
           {"state_half_widths", exp.state_half_widths},
           {"input_half_widths", exp.input_half_widths},
           {"state_set", polytope_json(exp.state_set_raw)},
           {"input_set", polytope_json(exp.input_set_raw)},
           {"state_set_tightened", polytope_json(exp.state_set_tight)},
           {"input_set_tightened", polytope_json(exp.input_set_tight)},
           {"config", config_echo(cfg)}};
  atomic_write(fs::path(cfg.out_dir) / "prs.json", out.dump(2) + "\n");
  std::printf("state half-widths:");
  for (double h : exp.state_half_widths) std::printf(" %.6g", h);
  std::printf("\ninput half-widths:");
  for (double h : exp.input_half_widths) std::printf(" %.6g", h);
  std::printf("\nstationary variance diag:");
  for (int i = 0; i < exp.sigma_inf.rows(); ++i) {
    std::printf(" %.6g", exp.sigma_inf(i, i));
  }
  std::printf("\n");
  return kOk;
}

std::string trajectory_csv(const EnsembleResult& result,
                           const Experiment& exp) {
  const int nx = static_cast<int>(exp.config.a.rows());
  const int nu = static_cast<int>(exp.config.b.cols());
  std::ostringstream csv;
  csv << "trial,step,mode";
  for (int i = 1; i <= nx; ++i) csv << ",x" << i;
  for (int i = 1; i <= nu; ++i) csv << ",u" << i;
  for (int i = 1; i <= nx; ++i) csv << ",z" << i;
  for (int i = 1; i <= nx; ++i) csv << ",e" << i;
  csv << ",cost,violated_state,violated_input\n";
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    const TrialRecord& trial = result.trials[t];
    for (std::size_t k = 0; k < trial.records.size(); ++k) {
      const StepRecord& rec = trial.records[k];
      csv << t << ',' << k << ','
          << (rec.mode == Mode::kM1 ? "M1" : "M2");
      for (int i = 0; i < nx; ++i) csv << ',' << fmt17(trial.states[k](i));
      for (int i = 0; i < nu; ++i) {
        csv << ',' << fmt17(rec.applied_input(i));
      }
      for (int i = 0; i < nx; ++i) csv << ',' << fmt17(rec.nominal_state(i));
      for (int i = 0; i < nx; ++i) csv << ',' << fmt17(rec.error(i));
      csv << ',' << fmt17(rec.optimal_cost) << ','
          << (exp.state_set_raw.contains(trial.states[k]) ? 0 : 1) << ','
          << (exp.input_set_raw.contains(rec.applied_input) ? 0 : 1) << '\n';
    }
  }
  return csv.str();
}

json summary_json(const EnsembleResult& result, const Experiment& exp,
                  const SimConfig& sim) {
  const ExperimentConfig& cfg = exp.config;
  const int last10 = std::min(10, cfg.steps);
  json faces = json::array();
  for (std::size_t f = 0; f < cfg.state_faces.size(); ++f) {
    Matrix n(1, cfg.state_faces[f].normal.size());
    n.row(0) = cfg.state_faces[f].normal;
    Vector o(1);
    o << cfg.state_faces[f].offset;
    faces.push_back(rate_json(empirical_satisfaction(
        result, Polytope::make(n, o), 1, last10)));
  }
  const RateEstimate joint =
      empirical_satisfaction(result, exp.state_set_raw, 1, last10);
  const RateEstimate joint_all =
      empirical_satisfaction(result, exp.state_set_raw, 1, cfg.steps);
  const RateEstimate inputs =
      empirical_satisfaction(result, exp.input_set_raw, 0, cfg.steps - 1,
                             /*on_inputs=*/true);

  // Per-trial alternative counting: a trial satisfies if it never violates
  // within the first-10 window.
  long ok_trials = 0;
  for (const TrialRecord& trial : result.trials) {
    bool ok = true;
    for (int k = 1; k <= last10 && k < static_cast<int>(trial.states.size());
         ++k) {
      if (!exp.state_set_raw.contains(trial.states[k])) ok = false;
    }
    ok_trials += ok ? 1 : 0;
  }

  // Cost-bound report (Lyapunov certificate on the closed error loop).
  const Matrix a_k = cfg.a + cfg.b * exp.k_gain;
  CostBoundEstimate est;
  est.certificate = lyapunov_certificate(a_k, 1.0);
  est.epsilon = cfg.epsilon;
  RngStream lip_rng(cfg.seed, 0x11F5C817);
  const MpcProblem& lip_problem =
      sim.variant == Variant::kSmpcPrs ? sim.problem : sim.context.base;
  est.lipschitz_c =
      estimate_lipschitz_c(lip_problem, est.certificate, 200, lip_rng);
  RngStream w_rng(cfg.seed, 0x30127F3);
  const MonteCarloEstimate w_p =
      expected_p_norm(sim.schedule.base, est.certificate, 100000, w_rng);
  const CostBoundReport bound = cost_bound_report(result, est, sim, w_p);

  json j{{"schema", 1},
         {"config", config_echo(cfg)},
         {"joint_state_rate_first10", rate_json(joint)},
         {"joint_state_rate_all_steps", rate_json(joint_all)},
         {"state_face_rates_first10", faces},
         {"input_rate", rate_json(inputs)},
         {"per_trial_no_violation_first10",
          static_cast<double>(ok_trials) /
              static_cast<double>(result.trials.size())},
         {"mode1_count", result.mode1_count},
         {"mode2_count", result.mode2_count},
         {"mode1_fraction",
          static_cast<double>(result.mode1_count) /
              static_cast<double>(result.mode1_count + result.mode2_count)},
         {"cost_bound",
          json{{"lipschitz_c", est.lipschitz_c},
               {"epsilon", est.epsilon},
               {"expected_w_p_norm", w_p.value},
               {"lhs_running_average", bound.lhs_average},
               {"rhs_bound", bound.rhs_bound},
               {"average_bound_holds", bound.average_bound_holds},
               {"worst_decrease_margin", bound.worst_decrease_margin},
               {"decrease_holds", bound.decrease_holds}}}};
  if (cfg.burst_cov) {
    long ok = 0, tot = 0;
    for (const TrialRecord& trial : result.trials) {
      for (int k = cfg.burst_period;
           k + 1 < static_cast<int>(trial.states.size());
           k += cfg.burst_period) {
        ++tot;
        if (exp.state_set_raw.contains(trial.states[k + 1])) ++ok;
      }
    }
    j["post_burst_state_rate"] =
        tot > 0 ? static_cast<double>(ok) / static_cast<double>(tot) : 1.0;
  }
  return j;
}

int cmd_simulate(const ExperimentConfig& cfg, int threads) {
  Experiment exp = build_experiment(cfg);
  exp.sim.threads = threads;
  const EnsembleResult result = run_ensemble(exp.sim);
  atomic_write(fs::path(cfg.out_dir) / "trajectories.csv",
               trajectory_csv(result, exp));
  const json s = summary_json(result, exp, exp.sim);
  atomic_write(fs::path(cfg.out_dir) / "summary.json", s.dump(2) + "\n");
  std::printf("joint state rate (first 10 steps): %.4f\n",
              s["joint_state_rate_first10"]["rate"].get<double>());
  std::printf("mode 1 fraction: %.4f\n", s["mode1_fraction"].get<double>());
  return kOk;
}

int cmd_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                int threads) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  if (!same(a.a, b.a) || !same(a.b, b.b) || !same(a.w_cov, b.w_cov) ||
      a.burst_cov.has_value() != b.burst_cov.has_value() ||
      (a.burst_cov && !same(*a.burst_cov, *b.burst_cov)) ||
      a.burst_period != b.burst_period || a.trials != b.trials ||
      a.steps != b.steps || a.seed != b.seed) {
    std::fprintf(stderr,
                 "compare: configs must share system, disturbance, and "
                 "simulation sections\n");
    return kConfigMismatch;
  }
  Experiment ea = build_experiment(a);
  Experiment eb = build_experiment(b);
  ea.sim.threads = threads;
  eb.sim.threads = threads;
  // Same seed and per-(trial, step) sub-streams → common random numbers.
  const EnsembleResult ra = run_ensemble(ea.sim);
  const EnsembleResult rb = run_ensemble(eb.sim);

  json out{{"schema", 1},
           {"a", summary_json(ra, ea, ea.sim)},
           {"b", summary_json(rb, eb, eb.sim)}};

  // Plot-ready series: per-step mean and quantile band of every state
  // component, for both ensembles.
  const int nx = static_cast<int>(a.a.rows());
  std::ostringstream csv;
  csv << "step";
  for (const char* side : {"a", "b"}) {
    for (int i = 1; i <= nx; ++i) {
      csv << ',' << side << "_x" << i << "_mean"
          << ',' << side << "_x" << i << "_q05"
          << ',' << side << "_x" << i << "_q95";
    }
  }
  csv << '\n';
  auto quantile = [](std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
  };
  for (int k = 0; k <= a.steps; ++k) {
    csv << k;
    for (const EnsembleResult* r : {&ra, &rb}) {
      for (int i = 0; i < nx; ++i) {
        std::vector<double> vals;
        vals.reserve(r->trials.size());
        double mean = 0.0;
        for (const TrialRecord& trial : r->trials) {
          vals.push_back(trial.states[k](i));
          mean += trial.states[k](i);
        }
        mean /= static_cast<double>(vals.size());
        csv << ',' << fmt17(mean) << ',' << fmt17(quantile(vals, 0.05))
            << ',' << fmt17(quantile(vals, 0.95));
      }
    }
    csv << '\n';
  }
  atomic_write(fs::path(a.out_dir) / "compare.json", out.dump(2) + "\n");
  atomic_write(fs::path(a.out_dir) / "compare_series.csv", csv.str());
  const double rate_a = out["a"]["joint_state_rate_first10"]["rate"];
  const double rate_b = out["b"]["joint_state_rate_first10"]["rate"];
  std::printf("joint rate first 10: a=%.4f b=%.4f\n", rate_a, rate_b);
  if (a.burst_cov) {
    std::printf("post-burst rate: a=%.4f b=%.4f\n",
                out["a"]["post_burst_state_rate"].get<double>(),
                out["b"]["post_burst_state_rate"].get<double>());
  }
  return kOk;
}

int cmd_validate(const ExperimentConfig& cfg, int threads, double shrink) {
  Experiment exp = build_experiment(cfg);
  exp.sim.threads = threads;
  const EnsembleResult result = run_ensemble(exp.sim);
  const Matrix a_k = cfg.a + cfg.b * exp.k_gain;

  json checks = json::array();
  bool all_ok = true;
  auto record = [&](const std::string& name, bool ok, json detail) {
    detail["name"] = name;
    detail["pass"] = ok;
    checks.push_back(std::move(detail));
    all_ok = all_ok && ok;
  };

  // Closed-loop membership of e(k) in each per-face interval set at its
  // configured level, every step.
  for (std::size_t f = 0; f < cfg.state_faces.size(); ++f) {
    IntervalPrs prs = marginal_interval_prs(cfg.state_faces[f].normal,
                                            exp.sigma_inf,
                                            cfg.state_faces[f].level);
    prs.half_width *= shrink;
    const auto rates = closed_loop_prs_check(result, prs);
    bool ok = true;
    double worst = 1.0;
    for (const RateEstimate& r : rates) {
      const double floor =
          cfg.state_faces[f].level - 3.0 * std::max(r.standard_error, 1e-9);
      worst = std::min(worst, r.rate - floor);
      ok = ok && r.rate >= floor;
    }
    record("closed_loop_prs_face_" + std::to_string(f), ok,
           json{{"worst_margin", worst}});
  }

  // Joint ellipsoidal set at the state level (stationary variance).
  {
    const double level = cfg.state_faces.front().level;
    EllipsoidPrs prs = gaussian_prs(exp.sigma_inf, level,
                                    static_cast<int>(cfg.a.rows()));
    prs.shape *= shrink * shrink;
    const auto rates = closed_loop_prs_check(result, prs);
    bool ok = true;
    double worst = 1.0;
    for (const RateEstimate& r : rates) {
      const double floor = level - 3.0 * std::max(r.standard_error, 1e-9);
      worst = std::min(worst, r.rate - floor);
      ok = ok && r.rate >= floor;
    }
    record("closed_loop_prs_joint", ok, json{{"worst_margin", worst}});
  }

  // Nestedness: n-step half-widths are monotone in n and dominated by the
  // stationary one, so every n-step set is a PRS at earlier steps too.
  {
    bool ok = true;
    const RowVector dir = cfg.state_faces.front().normal;
    const double level = cfg.state_faces.front().level;
    double prev = 0.0;
    const auto vars = propagate_variance(a_k, cfg.w_cov, 20);
    for (const Matrix& sigma : vars) {
      const double hw =
          marginal_interval_prs(dir, sigma, level).half_width;
      ok = ok && hw >= prev - 1e-12;
      prev = hw;
    }
    const double hw_inf =
        marginal_interval_prs(dir, exp.sigma_inf, level).half_width;
    ok = ok && hw_inf >= prev - 1e-9;
    record("nestedness_half_widths", ok, json{{"stationary", hw_inf}});
  }

  // Predictive satisfaction: forward-sample the prediction error dynamics
  // i steps and check membership in the i-step set, i = 1..5.
  {
    bool ok = true;
    double worst = 1.0;
    const RowVector dir = cfg.state_faces.front().normal;
    const double level = cfg.state_faces.front().level;
    const GaussianDisturbance w_model = GaussianDisturbance::make(
        Vector::Zero(cfg.a.rows()), cfg.w_cov);
    const auto vars = propagate_variance(a_k, cfg.w_cov, 5);
    for (int i = 1; i <= 5; ++i) {
      IntervalPrs prs = marginal_interval_prs(dir, vars[i], level);
      prs.half_width *= shrink;
      RngStream rng(cfg.seed, 0xA11DA7E0 + static_cast<std::uint64_t>(i));
      const MonteCarloEstimate est =
          mc_prs_level(a_k, w_model, PrsSet(prs), i, 4000, rng);
      const double floor = level - 3.0 * std::max(est.standard_error, 1e-9);
      worst = std::min(worst, est.value - floor);
      ok = ok && est.value >= floor;
    }
    record("predictive_satisfaction", ok, json{{"worst_margin", worst}});
  }

  json out{{"schema", 1}, {"config", config_echo(cfg)}, {"checks", checks},
           {"all_pass", all_ok}};
  atomic_write(fs::path(cfg.out_dir) / "validate.json", out.dump(2) + "\n");
  for (const json& c : checks) {
    std::printf("%-28s %s\n", c["name"].get<std::string>().c_str(),
                c["pass"].get<bool>() ? "pass" : "FAIL");
  }
  return all_ok ? kOk : kValidationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic-reachable-set MPC toolkit"};
  app.require_subcommand(1);

  CliOverrides ov;
  std::string config_path, config_b_path;
  double shrink = 1.0;
  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    auto* opt = sub->add_option("--config", config_path, "experiment config");
    if (need_config) opt->required();
    sub->add_option("--out", ov.out_dir, "output directory override");
    sub->add_option("--seed", ov.seed, "seed override")
        ->each([&](const std::string&) { ov.seed_set = true; });
    sub->add_option("--trials", ov.trials, "trial count override");
    sub->add_option("--steps", ov.steps, "step count override");
    sub->add_option("--threads", ov.threads, "worker threads (0 = auto)");
  };

  CLI::App* prs = app.add_subcommand("prs", "compute reachable sets and "
                                            "tightened constraints");
  add_common(prs);
  CLI::App* simulate =
      app.add_subcommand("simulate", "run a closed-loop ensemble");
  add_common(simulate);
  CLI::App* compare =
      app.add_subcommand("compare", "run two configs on common random "
                                    "numbers");
  add_common(compare);
  compare->add_option("--config-b", config_b_path, "second experiment config")
      ->required();
  CLI::App* validate =
      app.add_subcommand("validate", "run the statistical property suite");
  add_common(validate);
  validate->add_option("--shrink", shrink,
                       "scale factor on PRS half-widths (testing aid)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prs->parsed()) {
      return cmd_prs(load_with_overrides(config_path, ov));
    }
    if (simulate->parsed()) {
      return cmd_simulate(load_with_overrides(config_path, ov), ov.threads);
    }
    if (compare->parsed()) {
      return cmd_compare(load_with_overrides(config_path, ov),
                         load_with_overrides(config_b_path, ov), ov.threads);
    }
    if (validate->parsed()) {
      return cmd_validate(load_with_overrides(config_path, ov), ov.threads,
                          shrink);
    }
  } catch (const EmptyTightening& e) {
    std::fprintf(stderr, "empty tightening on face %d: %s\n", e.face,
                 e.what());
    return kEmptyTightening;
  } catch (const InitialInfeasible& e) {
    std::fprintf(stderr, "initial state infeasible: %s\n", e.what());
    return kInitialInfeasible;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kInternal;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInternal;
  }
  return kInternal;
}
