#include <doctest.h>

#include <cmath>

#include <smpc/reachability.hpp>

using namespace smpc;

namespace {

Matrix stable_loop() {
  Matrix a_k(2, 2);
  a_k << 0.8744212, 0.46875015, -0.2505575, -0.06249969;
  return a_k;
}

Matrix w_cov() {
  Matrix w(2, 2);
  w << 0.01, 0, 0, 1;
  return w;
}

}  // namespace

TEST_CASE("chebyshev radius formula and conservatism over gaussian") {
  Matrix sigma = Matrix::Identity(2, 2);
  EllipsoidPrs cheb = chebyshev_prs(sigma, 0.8, 2);
  CHECK(cheb.radius == doctest::Approx(2.0 / 0.2).epsilon(1e-12));
  EllipsoidPrs gauss = gaussian_prs(sigma, 0.8, 2);
  CHECK(gauss.radius == doctest::Approx(chi2_quantile(0.8, 2)).epsilon(1e-9));
  // Chebyshev must dominate the exact Gaussian set at every level.
  for (double p : {0.5, 0.6, 0.9, 0.95}) {
    CHECK(chebyshev_prs(sigma, p, 2).radius >
          gaussian_prs(sigma, p, 2).radius);
  }
}

TEST_CASE("ellipsoid membership") {
  EllipsoidPrs set = gaussian_prs(Matrix::Identity(2, 2), 0.9, 2);
  CHECK(set.contains(Vector::Zero(2)));
  Vector edge(2);
  edge << std::sqrt(set.radius) - 1e-9, 0.0;
  CHECK(set.contains(edge));
  CHECK_FALSE(set.contains(edge * 1.01));
}

TEST_CASE("marginal interval set matches the direct formula") {
  Matrix sigma(2, 2);
  sigma << 0.556903, -0.13, -0.13, 1.034933;
  RowVector dir(2);
  dir << 0, 1;
  IntervalPrs prs = marginal_interval_prs(dir, sigma, 0.6);
  CHECK(prs.half_width ==
        doctest::Approx(normal_quantile(0.8) * std::sqrt(sigma(1, 1)))
            .epsilon(1e-12));
  CHECK(prs.half_width == doctest::Approx(0.8561952105798658).epsilon(1e-7));
  Vector inside(2);
  inside << 100.0, 0.5;  // off-axis component is unconstrained
  CHECK(prs.contains(inside));
}

TEST_CASE("monte carlo level of the gaussian set is exact within error") {
  GaussianDisturbance w = GaussianDisturbance::make(Vector::Zero(2), w_cov());
  Matrix a_k = stable_loop();
  const int n = 6;
  EllipsoidPrs set = n_step_prs(a_k, w_cov(), n, 0.9, PrsMethod::kGaussian);
  RngStream rng(11, 0);
  MonteCarloEstimate est = mc_prs_level(a_k, w, PrsSet(set), n, 20000, rng);
  CHECK(std::fabs(est.value - 0.9) < 4.0 * est.standard_error);

  // Chebyshev at the same level over-covers.
  EllipsoidPrs cheb = n_step_prs(a_k, w_cov(), n, 0.9, PrsMethod::kChebyshev);
  RngStream rng2(12, 0);
  MonteCarloEstimate est2 =
      mc_prs_level(a_k, w, PrsSet(cheb), n, 20000, rng2);
  CHECK(est2.value > 0.9);
}

TEST_CASE("stationary set dominates every finite-step set") {
  Matrix a_k = stable_loop();
  EllipsoidPrs inf_set =
      n_step_prs(a_k, w_cov(), 0, 0.9, PrsMethod::kGaussian, true);
  RowVector dir(2);
  for (int axis = 0; axis < 2; ++axis) {
    dir.setZero();
    dir(axis) = 1.0;
    double prev = 0.0;
    for (int n = 1; n <= 25; ++n) {
      EllipsoidPrs set = n_step_prs(a_k, w_cov(), n, 0.9,
                                    PrsMethod::kGaussian);
      const double s = support_function(PrsSet(set), dir);
      CHECK(s >= prev - 1e-12);  // nested growth step over step
      prev = s;
    }
    CHECK(support_function(PrsSet(inf_set), dir) >= prev - 1e-9);
  }
}

TEST_CASE("interval sets shrink with level and nest across steps") {
  Matrix a_k = stable_loop();
  RowVector dir(2);
  dir << 0, 1;
  auto vars = propagate_variance(a_k, w_cov(), 15);
  double prev = 0.0;
  for (int n = 0; n <= 15; ++n) {
    const double hw = marginal_interval_prs(dir, vars[n], 0.6).half_width;
    CHECK(hw >= prev - 1e-12);
    prev = hw;
  }
  CHECK(marginal_interval_prs(dir, vars[15], 0.9).half_width >
        marginal_interval_prs(dir, vars[15], 0.6).half_width);
}

TEST_CASE("polytope construction and membership") {
  Matrix n(2, 2);
  n << 0, 1, 0, -1;
  Vector b(2);
  b << 1.2, 1.2;
  Polytope p = Polytope::make(n, b);
  Vector x(2);
  x << 100.0, 1.19;
  CHECK(p.contains(x));
  x(1) = 1.21;
  CHECK_FALSE(p.contains(x));
  CHECK(p.contains(x, 0.02));

  Vector bad(2);
  bad << 1.0, -0.1;
  CHECK_THROWS_AS(Polytope::make(n, bad), DomainError);
}

TEST_CASE("support function of ellipsoids and intervals") {
  Matrix sigma(2, 2);
  sigma << 2.0, 0.3, 0.3, 1.0;
  EllipsoidPrs ell{sigma, 4.0, 0.9};
  RowVector d(2);
  d << 1.0, -2.0;
  const double expect =
      std::sqrt(4.0 * (d * sigma * d.transpose())(0, 0));
  CHECK(support_function(PrsSet(ell), d) ==
        doctest::Approx(expect).epsilon(1e-12));

  IntervalPrs band{RowVector(2), 0.7, 0.6};
  band.direction << 0, 1;
  RowVector parallel(2);
  parallel << 0, -3.0;
  CHECK(support_function(PrsSet(band), parallel) ==
        doctest::Approx(2.1).epsilon(1e-12));
  RowVector off(2);
  off << 1.0, 1.0;
  CHECK_THROWS_AS(support_function(PrsSet(band), off), Unbounded);
}

TEST_CASE("pontryagin tightening reduces offsets by the support") {
  Matrix n(2, 2);
  n << 0, 1, 0, -1;
  Vector b(2);
  b << 1.2, 1.2;
  Polytope x_set = Polytope::make(n, b);
  IntervalPrs band{RowVector(2), 0.85, 0.6};
  band.direction << 0, 1;
  Polytope tight = pontryagin_tighten(x_set, PrsSet(band));
  CHECK(tight.offsets(0) == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(tight.offsets(1) == doctest::Approx(0.35).epsilon(1e-12));

  band.half_width = 1.3;  // wider than the set
  try {
    pontryagin_tighten(x_set, PrsSet(band));
    CHECK(false);
  } catch (const EmptyTightening& e) {
    CHECK(e.face == 0);
  }
}

TEST_CASE("per-face tightening uses each face's own set") {
  Matrix n(2, 2);
  n << 0, 1, 0, -1;
  Vector b(2);
  b << 1.2, 1.0;
  Polytope x_set = Polytope::make(n, b);
  IntervalPrs narrow{RowVector(2), 0.2, 0.6};
  narrow.direction << 0, 1;
  IntervalPrs wide{RowVector(2), 0.5, 0.6};
  wide.direction << 0, 1;
  Polytope tight = pontryagin_tighten(
      x_set, std::vector<PrsSet>{PrsSet(narrow), PrsSet(wide)});
  CHECK(tight.offsets(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tight.offsets(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero disturbance produces zero tightening") {
  RowVector dir(2);
  dir << 0, 1;
  IntervalPrs prs = marginal_interval_prs(dir, Matrix::Zero(2, 2), 0.6);
  CHECK(prs.half_width == 0.0);
}
