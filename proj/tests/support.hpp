#pragma once

// Shared double-integrator fixture used across the test binaries.

#include <string>

#include <smpc/config.hpp>

namespace smpc::testing {

inline std::string di_config_json(const std::string& variant = "smpc-prs",
                                  int trials = 500, int steps = 10,
                                  unsigned seed = 1, bool burst = false) {
  std::string dist = R"("covariance": [[0.01, 0], [0, 1]])";
  if (burst) {
    dist += R"(, "burst_covariance": [[10, 0], [0, 1]], "burst_period": 10)";
  }
  return std::string(R"({
  "schema": 1,
  "system": {"A": [[1, 1], [0, 1]], "B": [[0.5], [1]]},
  "disturbance": {)") + dist + R"(},
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
  "controller": {"variant": ")" + variant + R"(", "horizon": 30},
  "simulation": {"trials": )" + std::to_string(trials) +
         R"(, "steps": )" + std::to_string(steps) +
         R"(, "x0": [6, 0], "seed": )" + std::to_string(seed) + R"(},
  "outputs": {"directory": "out", "formats": ["csv", "json"]}
})";
}

inline Experiment di_experiment(const std::string& variant = "smpc-prs",
                                int trials = 500, int steps = 10,
                                unsigned seed = 1, bool burst = false) {
  return build_experiment(
      parse_config(di_config_json(variant, trials, steps, seed, burst)));
}

}  // namespace smpc::testing
