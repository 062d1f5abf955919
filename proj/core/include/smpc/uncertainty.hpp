#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smpc/numerics.hpp"

namespace smpc {

// Counter-based splittable RNG: every (seed, stream_id) pair yields a fixed
// sample sequence, and sub-streams derived per (trial, step) are independent
// of scheduling, so parallel ensembles reproduce bit-for-bit.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  // Independent sub-stream, e.g. one per (trial, step) pair.
  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64();
  // Uniform in (0, 1).
  double next_uniform();
  // Standard normal via Box-Muller on counter-derived uniforms.
  double next_normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

struct GaussianDisturbance {
  Vector mean;
  Matrix covariance;

  // Validates symmetry/PSD and caches the factor used by sample().
  static GaussianDisturbance make(Vector mean, Matrix covariance);

  int dim() const { return static_cast<int>(mean.size()); }
  const Matrix& factor() const { return factor_; }

 private:
  Matrix factor_;  // covariance = factor factorᵀ
};

// One draw w = mean + L·ξ with ξ standard normal.
Vector sample(const GaussianDisturbance& model, RngStream& rng);

struct DisturbanceSchedule {
  GaussianDisturbance base;
  std::optional<GaussianDisturbance> burst;
  int burst_period = 0;  // required >= 1 when burst present

  // Burst replaces the base draw at k = period, 2·period, ... (never k = 0).
  bool is_burst_step(int k) const {
    return burst.has_value() && burst_period >= 1 && k > 0 &&
           k % burst_period == 0;
  }
  const GaussianDisturbance& model_at(int k) const {
    return is_burst_step(k) ? *burst : base;
  }
};

// [var(x(0)), ..., var(x(n))] with var(x(0)) = 0 and
// var(x(i+1)) = a_k var(x(i)) a_kᵀ + w_cov.
std::vector<Matrix> propagate_variance(const Matrix& a_k, const Matrix& w_cov,
                                       int n);

struct MonteCarloEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo estimate of E(‖w‖_P) = E(√(wᵀPw)).
MonteCarloEstimate expected_p_norm(const GaussianDisturbance& model,
                                   const Matrix& p, int samples,
                                   RngStream& rng);

}  // namespace smpc
