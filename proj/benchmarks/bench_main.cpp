#include <benchmark/benchmark.h>

#include <smpc/config.hpp>

namespace {

using namespace smpc;

std::string di_json(int trials, int steps) {
  return std::string(R"({
  "schema": 1,
  "system": {"A": [[1, 1], [0, 1]], "B": [[0.5], [1]]},
  "disturbance": {"covariance": [[0.01, 0], [0, 1]]},
  "constraints": {
    "state": [
      {"normal": [0, 1], "offset": 1.2, "level": 0.6},
      {"normal": [0, -1], "offset": 1.2, "level": 0.6}
    ],
    "input": [
      {"normal": [1], "offset": 6, "level": 0.9},
      {"normal": [-1], "offset": 6, "level": 0.9}
    ]
  },
  "costs": {"Q": [[0.1, 0], [0, 1]], "R": [[0.1]], "terminal_mode": "origin"},
  "controller": {"variant": "smpc-prs", "horizon": 30},
  "simulation": {"trials": )") + std::to_string(trials) +
         R"(, "steps": )" + std::to_string(steps) +
         R"(, "x0": [6, 0], "seed": 1},
  "outputs": {"directory": "out", "formats": ["csv"]}
})";
}

const Experiment& fixture() {
  static Experiment exp = build_experiment(parse_config(di_json(50, 10)));
  return exp;
}

void BM_OfflinePipeline(benchmark::State& state) {
  ExperimentConfig cfg = parse_config(di_json(50, 10));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_experiment(cfg));
  }
}
BENCHMARK(BM_OfflinePipeline);

void BM_QpBuild(benchmark::State& state) {
  const Experiment& exp = fixture();
  Vector x0(2);
  x0 << 6, 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_qp(exp.sim.problem, x0));
  }
}
BENCHMARK(BM_QpBuild);

void BM_QpSolve(benchmark::State& state) {
  const Experiment& exp = fixture();
  Vector x0(2);
  x0 << 6, 0;
  const DenseQp qp = build_qp(exp.sim.problem, x0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_dense_qp(qp));
  }
}
BENCHMARK(BM_QpSolve);

void BM_ControllerStep(benchmark::State& state) {
  const Experiment& exp = fixture();
  Vector x0(2);
  x0 << 6, 0;
  ControllerState cs;
  cs.previous_predicted = Vector::Zero(2);
  cs.variance = Matrix::Zero(2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        smpc_prs_step(cs, x0, exp.sim.problem, exp.k_gain));
  }
}
BENCHMARK(BM_ControllerStep);

void BM_Trial(benchmark::State& state) {
  SimConfig cfg = fixture().sim;
  cfg.steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trial(cfg, 0));
  }
}
BENCHMARK(BM_Trial)->Arg(10)->Arg(50);

void BM_Ensemble(benchmark::State& state) {
  SimConfig cfg = fixture().sim;
  cfg.trials = static_cast<int>(state.range(0));
  cfg.steps = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_ensemble(cfg));
  }
}
BENCHMARK(BM_Ensemble)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
