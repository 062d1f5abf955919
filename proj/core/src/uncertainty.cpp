#include "smpc/uncertainty.hpp"

#include <cmath>

namespace smpc {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z += kGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix2(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b * kGamma));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), key_(mix2(seed, stream_id)) {}

RngStream RngStream::substream(std::uint64_t id) const {
  RngStream out(seed_, stream_);
  out.key_ = mix2(key_, id);
  return out;
}

std::uint64_t RngStream::next_u64() { return splitmix64(key_ + kGamma * ++counter_); }

double RngStream::next_uniform() {
  // 53-bit mantissa, shifted into (0,1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

GaussianDisturbance GaussianDisturbance::make(Vector mean, Matrix covariance) {
  if (mean.size() != covariance.rows()) {
    throw DomainError("GaussianDisturbance: mean/covariance dimension mismatch");
  }
  require_symmetric(covariance, "GaussianDisturbance: covariance");

  GaussianDisturbance g;
  g.mean = std::move(mean);
  g.covariance = std::move(covariance);

  // LDLT handles singular PSD covariances (e.g. exactly zero).
  Eigen::LDLT<Matrix> ldlt(0.5 * (g.covariance + g.covariance.transpose()));
  Vector d = ldlt.vectorD();
  if (d.minCoeff() < -1e-10 * std::max(1.0, d.cwiseAbs().maxCoeff())) {
    throw CholeskyFailure("GaussianDisturbance: covariance is indefinite");
  }
  Matrix l = ldlt.matrixL();
  Vector sqrt_d = d.cwiseMax(0.0).cwiseSqrt();
  g.factor_ = ldlt.transpositionsP().transpose() * Matrix(l * sqrt_d.asDiagonal());
  return g;
}

Vector sample(const GaussianDisturbance& model, RngStream& rng) {
  Vector xi(model.dim());
  for (int i = 0; i < model.dim(); ++i) xi(i) = rng.next_normal();
  return model.mean + model.factor() * xi;
}

std::vector<Matrix> propagate_variance(const Matrix& a_k, const Matrix& w_cov,
                                       int n) {
  if (n < 0) throw DomainError("propagate_variance: n must be >= 0");
  if (a_k.rows() != a_k.cols() || w_cov.rows() != a_k.rows()) {
    throw DomainError("propagate_variance: dimension mismatch");
  }
  std::vector<Matrix> out;
  out.reserve(n + 1);
  out.push_back(Matrix::Zero(a_k.rows(), a_k.cols()));
  for (int i = 0; i < n; ++i) {
    Matrix next = a_k * out.back() * a_k.transpose() + w_cov;
    out.push_back(0.5 * (next + next.transpose()));
  }
  return out;
}

MonteCarloEstimate expected_p_norm(const GaussianDisturbance& model,
                                   const Matrix& p, int samples,
                                   RngStream& rng) {
  if (samples < 1000) {
    throw DomainError("expected_p_norm: need at least 1e3 samples");
  }
  require_symmetric(p, "expected_p_norm: p");
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < samples; ++i) {
    Vector w = sample(model, rng);
    const double v = std::sqrt(std::max(0.0, w.dot(p * w)));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / samples;
  const double var = std::max(0.0, sum_sq / samples - mean * mean);
  return {mean, std::sqrt(var / samples)};
}

}  // namespace smpc
