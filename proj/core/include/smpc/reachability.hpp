#pragma once

#include <variant>
#include <vector>

#include "smpc/uncertainty.hpp"

namespace smpc {

// Ellipsoidal PRS { e : eᵀ Σ⁻¹ e ≤ p̃ } of probability level `level`.
struct EllipsoidPrs {
  Matrix shape;     // Σ
  double radius;    // p̃ (dimensionless)
  double level;     // p

  bool contains(const Vector& e) const;
};

// Interval PRS { e : |a·e| ≤ half_width } aligned with a constraint normal.
struct IntervalPrs {
  RowVector direction;  // a
  double half_width;
  double level;

  bool contains(const Vector& e) const {
    return std::fabs(direction.dot(e)) <= half_width;
  }
};

using PrsSet = std::variant<EllipsoidPrs, IntervalPrs>;

bool prs_contains(const PrsSet& set, const Vector& e);

// Polytope { x : normals·x ≤ offsets }. Constraint sets contain the origin,
// so offsets are required nonnegative at construction.
struct Polytope {
  Matrix normals;  // one row per face
  Vector offsets;

  static Polytope make(Matrix normals, Vector offsets);

  int faces() const { return static_cast<int>(offsets.size()); }
  int dim() const { return static_cast<int>(normals.cols()); }
  bool contains(const Vector& x, double tol = 0.0) const {
    return ((normals * x - offsets).array() <= tol).all();
  }
};

// Chebyshev PRS of Eq-style radius p̃ = dim/(1 − level) on variance sigma.
// Guarantees Pr(e ∈ R) ≥ level for any zero-mean e with variance sigma.
EllipsoidPrs chebyshev_prs(const Matrix& sigma, double level, int dim);

// Gaussian PRS with radius p̃ = chi2_quantile(level, dim); exact level for
// zero-mean Gaussian errors with variance sigma.
EllipsoidPrs gaussian_prs(const Matrix& sigma, double level, int dim);

// Half-space-aligned PRS from the marginal Gaussian along `direction`:
// half_width = normal_quantile((1+level)/2)·sqrt(direction Σ directionᵀ).
IntervalPrs marginal_interval_prs(const RowVector& direction,
                                  const Matrix& sigma, double level);

enum class PrsMethod { kChebyshev, kGaussian };

// PRS built on the n-step variance of  e⁺ = a_k e + w,  e(0) = 0.
// use `infinite_horizon = true` for the stationary-variance set (requires
// stable a_k; throws NonConvergent otherwise).
EllipsoidPrs n_step_prs(const Matrix& a_k, const Matrix& w_cov, int n,
                        double level, PrsMethod method,
                        bool infinite_horizon = false);

// Empirical Pr(x(n) ∈ set) for x⁺ = a_k x + w started at 0.
MonteCarloEstimate mc_prs_level(const Matrix& a_k,
                                const GaussianDisturbance& dist,
                                const PrsSet& set, int n, int trials,
                                const RngStream& rng);

// sup_{e ∈ set} direction·e. Throws Unbounded when the set is unbounded in
// the queried direction (interval PRS queried off-axis).
double support_function(const PrsSet& set, const RowVector& direction);

// Pontryagin difference x_set ⊖ prs: same normals, offsets reduced by the
// support function of the PRS along each face. Throws EmptyTightening if a
// tightened offset goes negative (origin excluded).
Polytope pontryagin_tighten(const Polytope& x_set, const PrsSet& prs);

// Per-face variant: face i is tightened with its own PRS.
Polytope pontryagin_tighten(const Polytope& x_set,
                            const std::vector<PrsSet>& per_face_prs);

}  // namespace smpc
