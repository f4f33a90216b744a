#pragma once

// Moments of the conditional score under sampling within outcome strata, the
// W-matrix identity linking expected information I and score covariance
// Sigma, and Wald-type inference for theta.
//
// All (S+K)-square matrices use the global block order: theta first, then
// gamma*_1..gamma*_K.

#include <optional>
#include <vector>

#include "assoc/distfactory.hpp"
#include "assoc/estimator.hpp"

namespace assoc {

// W_kl = delta_kl / n_k + 1 / n_0 for k, l = 1..K; n_vec has K+1 entries.
Matrix w_matrix(const Vector& n_vec);

struct TrueParameters {
  Lambda lambda;
  // L-inf residual of the least-squares fit of the joint's log odds ratios;
  // zero when the model is correctly specified.
  double misspecification = 0.0;
};

// The lambda that reproduces the retrospective conditionals p*_k of a finite
// joint under stratum sizes n_vec. theta comes from least squares on the log
// odds-ratio table (log-bilinear models) unless given explicitly.
TrueParameters true_lambda(const AssociationModel& model, const FiniteJoint& joint,
                           const Vector& n_vec, std::optional<Vector> theta = std::nullopt);

struct ExactMoments {
  Matrix info;          // I = sum_k n_k E[u u^T]
  Matrix sigma;         // Sigma = sum_k n_k Cov(u)
  Matrix info_hessian;  // sum_k n_k E[-d^2 log p*_k], the second route to I
  Vector mean_score;    // sum_k n_k E[u]; zero at a consistent lambda
  double consistency_residual = 0.0;  // max |p*_k(z_j; lambda) - p*_k from joint|
};

// Exact expectations over the finite covariate support of X | Y = y_k, with
// u = d log p*_k(X_k) / d lambda. Throws ConsistencyError when lambda does not
// reproduce the joint's retrospective conditionals within consistency_tol.
ExactMoments exact_moments(const AssociationModel& model, const Lambda& lambda,
                           const FiniteJoint& joint, const Vector& n_vec,
                           double consistency_tol = 1e-9);

// ||(I - Sigma) - I diag(0, W) I||_inf / max(1, ||I||_inf)
double w_identity_residual(const Matrix& info, const Matrix& sigma, const Matrix& w);

struct SandwichResult {
  Matrix cov;  // I^-1 Sigma I^-1
  // max |[I^-1]_tt - [I^-1 Sigma I^-1]_tt| / max |[I^-1]_tt|
  double theta_block_gap = 0.0;
};

SandwichResult sandwich_cov(const Matrix& info, const Matrix& sigma, Index theta_dim);

// theta block of J(lambda_hat)^-1.
Matrix wald_cov(const FitReport& fit);

struct WaldTest {
  double statistic = 0.0;
  Index df = 0;
  double p_value = 1.0;
};

// (C theta)^T [C V C^T]^-1 (C theta) with V = wald_cov(fit).
WaldTest wald_test(const FitReport& fit, const Matrix& c);

struct Interval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

std::vector<Interval> conf_intervals(const FitReport& fit, double level);
std::vector<Interval> conf_intervals(const Vector& estimate, const Matrix& cov, double level);

// Inverse standard normal CDF: rational approximation refined by one Halley
// step, accurate to well below 1e-9 on (0, 1).
double normal_quantile(double p);

// Upper tail of the chi-square distribution.
double chi_squared_sf(double x, double df);

}  // namespace assoc
