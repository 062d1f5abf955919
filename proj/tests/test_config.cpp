#include <doctest.h>

#include <string>

#include <smpc/config.hpp>
#include <smpc/errors.hpp>

#include "support.hpp"

using namespace smpc;

namespace {

// String surgery on the shared fixture document keeps the mutations local
// to the key under test.
std::string mutate(const std::string& from, const std::string& to,
                   const std::string& base = smpc::testing::di_config_json()) {
  std::string doc = base;
  auto pos = doc.find(from);
  REQUIRE(pos != std::string::npos);
  doc.replace(pos, from.size(), to);
  return doc;
}

}  // namespace

TEST_CASE("fixture document parses to the expected values") {
  ExperimentConfig cfg = parse_config(smpc::testing::di_config_json());
  CHECK(cfg.a.rows() == 2);
  CHECK(cfg.a(0, 1) == 1.0);
  CHECK(cfg.b(0, 0) == 0.5);
  CHECK(cfg.w_cov(0, 0) == 0.01);
  CHECK(cfg.w_cov(1, 1) == 1.0);
  CHECK(!cfg.burst_cov.has_value());
  REQUIRE(cfg.state_faces.size() == 2);
  CHECK(cfg.state_faces[0].normal(1) == 1.0);
  CHECK(cfg.state_faces[0].offset == 1.2);
  CHECK(cfg.state_faces[0].level == 0.6);
  REQUIRE(cfg.input_faces.size() == 2);
  CHECK(cfg.input_faces[1].normal(0) == -1.0);
  CHECK(cfg.input_faces[1].offset == 6.0);
  CHECK(cfg.input_faces[1].level == 0.9);
  CHECK(cfg.q(1, 1) == 1.0);
  CHECK(cfg.r(0, 0) == 0.1);
  CHECK(cfg.terminal_mode == "origin");
  CHECK(cfg.variant == "smpc-prs");
  CHECK(cfg.horizon == 30);
  CHECK(cfg.trials == 500);
  CHECK(cfg.steps == 10);
  CHECK(cfg.x0(0) == 6.0);
  CHECK(cfg.seed == 1);
  CHECK(cfg.out_dir == "out");
  REQUIRE(cfg.formats.size() == 2);
}

TEST_CASE("burst settings parse together") {
  ExperimentConfig cfg = parse_config(
      smpc::testing::di_config_json("smpc-prs", 500, 100, 1, true));
  REQUIRE(cfg.burst_cov.has_value());
  CHECK((*cfg.burst_cov)(0, 0) == 10.0);
  CHECK(cfg.burst_period == 10);
}

TEST_CASE("burst covariance without a period is rejected") {
  std::string doc = mutate(
      R"("covariance": [[0.01, 0], [0, 1]])",
      R"("covariance": [[0.01, 0], [0, 1]], "burst_covariance": [[10, 0], [0, 1]])");
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("unknown keys are rejected in every section") {
  CHECK_THROWS_AS(
      parse_config(mutate(R"("schema": 1,)", R"("schema": 1, "extra": 1,)")),
      ConfigError);
  CHECK_THROWS_AS(parse_config(mutate(R"("system": {"A")",
                                      R"("system": {"typo": 3, "A")")),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config(mutate(R"({"normal": [0, 1], "offset": 1.2, "level": 0.6})",
                          R"({"normal": [0, 1], "offset": 1.2, "level": 0.6,
                              "slack": 0})")),
      ConfigError);
  CHECK_THROWS_AS(parse_config(mutate(R"("trials": 500)",
                                      R"("trials": 500, "warmup": 2)")),
                  ConfigError);
}

TEST_CASE("missing keys are rejected") {
  CHECK_THROWS_AS(parse_config(mutate(R"("seed": 1)", R"("seed_": 1)")),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config(mutate(R"("R": [[0.1]], )", "")), ConfigError);
}

TEST_CASE("schema version is enforced") {
  CHECK_THROWS_AS(parse_config(mutate(R"("schema": 1)", R"("schema": 2)")),
                  ConfigError);
}

TEST_CASE("malformed numerics are rejected") {
  // Ragged matrix row.
  CHECK_THROWS_AS(
      parse_config(mutate(R"("A": [[1, 1], [0, 1]])", R"("A": [[1, 1], [0]])")),
      ConfigError);
  // Probability level outside (0, 1).
  CHECK_THROWS_AS(
      parse_config(mutate(R"("offset": 1.2, "level": 0.6},)",
                          R"("offset": 1.2, "level": 1.0},)")),
      ConfigError);
  // x0 dimension mismatch.
  CHECK_THROWS_AS(
      parse_config(mutate(R"("x0": [6, 0])", R"("x0": [6, 0, 0])")),
      ConfigError);
  // Unknown variant.
  CHECK_THROWS_AS(
      parse_config(mutate(R"("variant": "smpc-prs")",
                          R"("variant": "smpc-x")")),
      ConfigError);
}

TEST_CASE("derived quantities match frozen reference values") {
  Experiment exp = smpc::testing::di_experiment();
  CHECK(exp.k_gain(0, 0) == doctest::Approx(-0.2505575).epsilon(1e-5));
  CHECK(exp.k_gain(0, 1) == doctest::Approx(-1.06249969).epsilon(1e-5));
  CHECK(exp.p_lqr(0, 0) == doctest::Approx(0.42405424).epsilon(1e-5));
  CHECK(exp.sigma_inf(1, 1) == doctest::Approx(1.03493296).epsilon(1e-5));
  CHECK(exp.sigma_inf(0, 1) == doctest::Approx(exp.sigma_inf(1, 0)));

  REQUIRE(exp.state_half_widths.size() == 2);
  REQUIRE(exp.input_half_widths.size() == 2);
  CHECK(exp.state_half_widths[0] ==
        doctest::Approx(0.8561952105798658).epsilon(1e-6));
  CHECK(exp.input_half_widths[0] ==
        doctest::Approx(1.7516625089089535).epsilon(1e-6));

  CHECK(exp.state_set_tight.offsets(0) ==
        doctest::Approx(1.2 - 0.8561952105798658).epsilon(1e-6));
  CHECK(exp.input_set_tight.offsets(0) ==
        doctest::Approx(6.0 - 1.7516625089089535).epsilon(1e-6));

  // The SimConfig is assembled from the tightened sets.
  CHECK((exp.sim.problem.state_set.offsets - exp.state_set_tight.offsets)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(exp.sim.variant == Variant::kSmpcPrs);
  CHECK(exp.sim.trials == 500);
  CHECK(exp.sim.steps == 10);
  CHECK(exp.sim.seed == 1);
}

TEST_CASE("the cost-conditioned variant carries untightened sets") {
  Experiment exp = smpc::testing::di_experiment("smpc-c");
  CHECK(exp.sim.variant == Variant::kSmpcC);
  CHECK((exp.sim.context.base.state_set.offsets - exp.state_set_raw.offsets)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  REQUIRE(exp.sim.context.state_face_levels.size() == 2);
  CHECK(exp.sim.context.state_face_levels[0] == doctest::Approx(0.8));
  CHECK(exp.sim.context.input_face_levels[0] == doctest::Approx(0.95));
}

TEST_CASE("zero disturbance means no tightening") {
  std::string doc = mutate(R"("covariance": [[0.01, 0], [0, 1]])",
                           R"("covariance": [[0, 0], [0, 0]])");
  Experiment exp = build_experiment(parse_config(doc));
  CHECK((exp.state_set_tight.offsets - exp.state_set_raw.offsets)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((exp.input_set_tight.offsets - exp.input_set_raw.offsets)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("over-tight constraints surface as empty tightening") {
  std::string doc = mutate(R"("offset": 1.2, "level": 0.6},)",
                           R"("offset": 0.5, "level": 0.6},)");
  doc = mutate(R"("offset": 1.2, "level": 0.6})",
               R"("offset": 0.5, "level": 0.6})", doc);
  CHECK_THROWS_AS(build_experiment(parse_config(doc)), EmptyTightening);
}
