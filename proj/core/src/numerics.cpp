#include "smpc/numerics.hpp"

#include <cmath>
#include <limits>

namespace smpc {

void require_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DomainError(std::string(what) + ": not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError(std::string(what) + ": not symmetric");
  }
}

void require_symmetric_psd(const Matrix& m, const char* what) {
  require_symmetric(m, what);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    throw DomainError(std::string(what) + ": not positive semidefinite");
  }
}

double spectral_radius(const Matrix& a) {
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& w) {
  if (a.rows() != a.cols() || w.rows() != w.cols() || a.rows() != w.rows()) {
    throw DomainError("solve_discrete_lyapunov: dimension mismatch");
  }
  require_symmetric(w, "solve_discrete_lyapunov: w");

  Matrix sigma = w;
  Matrix m = a;
  const double w_scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  constexpr int kMaxIter = 200;
  bool converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    Matrix delta = m * sigma * m.transpose();
    sigma += delta;
    m = m * m;
    if (!sigma.allFinite() || sigma.cwiseAbs().maxCoeff() > 1e130) {
      throw NonConvergent("solve_discrete_lyapunov: iteration diverged");
    }
    if (delta.cwiseAbs().maxCoeff() <=
        1e-14 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NonConvergent("solve_discrete_lyapunov: no contraction within cap");
  }
  sigma = 0.5 * (sigma + sigma.transpose());
  const double resid =
      (a * sigma * a.transpose() - sigma + w).cwiseAbs().maxCoeff();
  if (resid > 1e-10 * w_scale) {
    throw NonConvergent("solve_discrete_lyapunov: residual too large");
  }
  return sigma;
}

std::pair<Matrix, Matrix> lqr_gain(const Matrix& a, const Matrix& b,
                                   const Matrix& q, const Matrix& r) {
  const auto n = a.rows();
  if (b.rows() != n || q.rows() != n || r.rows() != b.cols()) {
    throw DomainError("lqr_gain: dimension mismatch");
  }
  require_symmetric(q, "lqr_gain: q");
  require_symmetric(r, "lqr_gain: r");

  // Riccati value iteration; quadratically contracting once the closed loop
  // stabilizes, cheap at these dimensions.
  Matrix p = q;
  constexpr int kMaxIter = 10000;
  bool converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    Matrix btp = b.transpose() * p;
    Matrix s = r + btp * b;
    Matrix k = s.ldlt().solve(btp * a);
    Matrix p_next = q + a.transpose() * p * a - a.transpose() * p * b * k;
    p_next = 0.5 * (p_next + p_next.transpose());
    const double delta = (p_next - p).cwiseAbs().maxCoeff();
    p = p_next;
    if (!p.allFinite() || p.cwiseAbs().maxCoeff() > 1e120) {
      throw NonConvergent("lqr_gain: value iteration diverged");
    }
    if (delta <= 1e-13 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NonConvergent("lqr_gain: value iteration stalled");
  }
  Matrix btp = b.transpose() * p;
  Matrix s = r + btp * b;
  Matrix k_gain = -s.ldlt().solve(btp * a);
  Matrix resid =
      q + a.transpose() * p * a -
      a.transpose() * p * b * s.ldlt().solve(btp * a) - p;
  if (resid.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
    throw NonConvergent("lqr_gain: DARE residual too large");
  }
  if (spectral_radius(a + b * k_gain) >= 1.0) {
    throw NonConvergent("lqr_gain: closed loop not stable");
  }
  return {k_gain, p};
}

Matrix lyapunov_certificate(const Matrix& a_k, double epsilon) {
  if (epsilon <= 0) {
    throw DomainError("lyapunov_certificate: epsilon must be positive");
  }
  // A_Kᵀ P A_K − P = −εI  is the Lyapunov equation for A_Kᵀ.
  Matrix eye = Matrix::Identity(a_k.rows(), a_k.cols());
  return solve_discrete_lyapunov(a_k.transpose(), epsilon * eye);
}

double min_eigenvalue(const Matrix& p) {
  require_symmetric(p, "min_eigenvalue: p");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (p + p.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: p must be in (0,1)");
  }
  double lo = -40.0, hi = 40.0;
  // Bisection on the CDF; interval shrinks below 1e-12 well within 180 steps.
  for (int it = 0; it < 180 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

// Regularized lower incomplete gamma P(a, x): series for x < a+1,
// continued fraction otherwise.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz's continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw DomainError("chi2_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  if (dof < 1) throw DomainError("chi2_quantile: dof must be >= 1");
  if (p < 0.0 || p >= 1.0) {
    throw DomainError("chi2_quantile: p must be in [0,1)");
  }
  if (p == 0.0) return 0.0;
  double hi = 1.0;
  while (chi2_cdf(hi, dof) < p) {
    hi *= 2.0;
    if (hi > 1e12) throw DomainError("chi2_quantile: bracket failure");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace smpc
