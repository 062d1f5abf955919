#include "smpc/reachability.hpp"

#include <cmath>
#include <functional>

namespace smpc {

bool EllipsoidPrs::contains(const Vector& e) const {
  return e.dot(shape.ldlt().solve(e)) <= radius;
}

bool prs_contains(const PrsSet& set, const Vector& e) {
  return std::visit([&](const auto& s) { return s.contains(e); }, set);
}

Polytope Polytope::make(Matrix normals, Vector offsets) {
  if (normals.rows() != offsets.size()) {
    throw DomainError("Polytope: row count mismatch");
  }
  if ((offsets.array() < 0.0).any()) {
    throw DomainError("Polytope: offsets must be nonnegative (origin inside)");
  }
  Polytope p;
  p.normals = std::move(normals);
  p.offsets = std::move(offsets);
  return p;
}

EllipsoidPrs chebyshev_prs(const Matrix& sigma, double level, int dim) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("chebyshev_prs: level must be in (0,1)");
  }
  require_symmetric_psd(sigma, "chebyshev_prs: sigma");
  return {sigma, static_cast<double>(dim) / (1.0 - level), level};
}

EllipsoidPrs gaussian_prs(const Matrix& sigma, double level, int dim) {
  if (!(level >= 0.0 && level < 1.0)) {
    throw DomainError("gaussian_prs: level must be in [0,1)");
  }
  require_symmetric_psd(sigma, "gaussian_prs: sigma");
  return {sigma, chi2_quantile(level, dim), level};
}

IntervalPrs marginal_interval_prs(const RowVector& direction,
                                  const Matrix& sigma, double level) {
  if (direction.norm() == 0.0) {
    throw DomainError("marginal_interval_prs: zero direction");
  }
  require_symmetric_psd(sigma, "marginal_interval_prs: sigma");
  const double var = direction * sigma * direction.transpose();
  const double hw = var <= 0.0
                        ? 0.0
                        : normal_quantile(0.5 * (1.0 + level)) * std::sqrt(var);
  return {direction, hw, level};
}

EllipsoidPrs n_step_prs(const Matrix& a_k, const Matrix& w_cov, int n,
                        double level, PrsMethod method, bool infinite_horizon) {
  Matrix sigma;
  if (infinite_horizon) {
    sigma = solve_discrete_lyapunov(a_k, w_cov);
  } else {
    sigma = propagate_variance(a_k, w_cov, n).back();
  }
  const int dim = static_cast<int>(a_k.rows());
  return method == PrsMethod::kChebyshev ? chebyshev_prs(sigma, level, dim)
                                         : gaussian_prs(sigma, level, dim);
}

MonteCarloEstimate mc_prs_level(const Matrix& a_k,
                                const GaussianDisturbance& dist,
                                const PrsSet& set, int n, int trials,
                                const RngStream& rng) {
  if (trials < 1000) throw DomainError("mc_prs_level: need at least 1e3 trials");
  long hits = 0;
  for (int t = 0; t < trials; ++t) {
    RngStream stream = rng.substream(static_cast<std::uint64_t>(t));
    Vector x = Vector::Zero(a_k.rows());
    for (int k = 0; k < n; ++k) x = a_k * x + sample(dist, stream);
    if (prs_contains(set, x)) ++hits;
  }
  const double p = static_cast<double>(hits) / trials;
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / trials)};
}

double support_function(const PrsSet& set, const RowVector& direction) {
  if (direction.norm() == 0.0) {
    throw DomainError("support_function: zero direction");
  }
  if (const auto* ell = std::get_if<EllipsoidPrs>(&set)) {
    const double q = direction * ell->shape * direction.transpose();
    return std::sqrt(std::max(0.0, ell->radius * q));
  }
  const auto& iv = std::get<IntervalPrs>(set);
  // Bounded only along the interval's own normal.
  const double aa = iv.direction.squaredNorm();
  const double c = direction.dot(iv.direction) / aa;
  if ((direction - c * iv.direction).norm() > 1e-9 * direction.norm()) {
    throw Unbounded("support_function: interval PRS unbounded in direction");
  }
  return std::fabs(c) * iv.half_width;
}

namespace {

Polytope tighten_impl(const Polytope& x_set,
                      const std::function<double(int)>& face_support) {
  Vector offsets = x_set.offsets;
  for (int i = 0; i < x_set.faces(); ++i) {
    offsets(i) -= face_support(i);
    if (offsets(i) < 0.0) {
      throw EmptyTightening(
          "pontryagin_tighten: face " + std::to_string(i) +
              " tightened past the origin",
          i);
    }
  }
  Polytope out;
  out.normals = x_set.normals;
  out.offsets = std::move(offsets);
  return out;
}

}  // namespace

Polytope pontryagin_tighten(const Polytope& x_set, const PrsSet& prs) {
  return tighten_impl(x_set, [&](int i) {
    return support_function(prs, x_set.normals.row(i));
  });
}

Polytope pontryagin_tighten(const Polytope& x_set,
                            const std::vector<PrsSet>& per_face_prs) {
  if (static_cast<int>(per_face_prs.size()) != x_set.faces()) {
    throw DomainError("pontryagin_tighten: one PRS per face required");
  }
  return tighten_impl(x_set, [&](int i) {
    return support_function(per_face_prs[i], x_set.normals.row(i));
  });
}

}  // namespace smpc
