#pragma once

#include <Eigen/Dense>
#include <utility>

#include "smpc/errors.hpp"

namespace smpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Throws DomainError unless m is symmetric to 1e-12 relative tolerance.
void require_symmetric(const Matrix& m, const char* what);

// Throws DomainError unless m is symmetric PSD (eigenvalues >= -1e-10).
void require_symmetric_psd(const Matrix& m, const char* what);

// Spectral radius of a square matrix.
double spectral_radius(const Matrix& a);

// Solves  a Σ aᵀ − Σ + w = 0  for stable a by the doubling iteration
//   Σ ← Σ + M Σ Mᵀ,  M ← M².
// Residual of the returned Σ is at most 1e-10·max(1, ‖w‖_∞).
// Throws NonConvergent when the iteration fails to contract (unstable a).
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& w);

// Discrete-time LQR: returns (k_gain, p_cost) with
//   p_cost solving the DARE to residual ≤ 1e-8,
//   k_gain = −(r + bᵀ p b)⁻¹ bᵀ p a,  and  ρ(a + b·k_gain) < 1.
// Throws NonConvergent when the Riccati iteration stalls.
std::pair<Matrix, Matrix> lqr_gain(const Matrix& a, const Matrix& b,
                                   const Matrix& q, const Matrix& r);

// Returns P ≻ 0 with  a_kᵀ P a_k − P = −epsilon·I  to residual 1e-10.
Matrix lyapunov_certificate(const Matrix& a_k, double epsilon);

// Smallest eigenvalue of a symmetric matrix, absolute tolerance 1e-10.
double min_eigenvalue(const Matrix& p);

// Standard normal CDF and its inverse. The quantile is solved by bisection
// on the CDF to absolute tolerance 1e-9; throws DomainError outside (0,1).
double normal_cdf(double z);
double normal_quantile(double p);

// Chi-squared CDF (regularized lower incomplete gamma) and quantile for
// dof ≥ 1. The quantile is solved by bisection to absolute tolerance 1e-9;
// throws DomainError for p outside [0,1).
double chi2_cdf(double x, int dof);
double chi2_quantile(double p, int dof);

}  // namespace smpc
