#pragma once

// Finite joint distributions of (X, Y) on a (J+1) x (K+1) grid: odds-ratio
// extraction, construction from marginals and odds ratios by iterative
// proportional fitting, the log-linear decomposition, and the retrospective
// mixture used by the conditional likelihood.

#include <optional>

#include "assoc/model.hpp"

namespace assoc {

class FiniteJoint {
 public:
  // probs is (J+1) x (K+1), strictly positive, summing to one within 1e-12.
  // z_support is dim_x x (J+1) and v_support dim_y x (K+1); column 0 of each
  // is the reference point and must be zero.
  FiniteJoint(Matrix probs, Matrix z_support, Matrix v_support);

  // Same, with unit-vector supports (z_j = e_j, v_k = e_k) for j, k >= 1:
  // the saturated feature maps.
  static FiniteJoint with_indicator_supports(Matrix probs);

  const Matrix& probs() const { return probs_; }
  const Matrix& z_support() const { return z_support_; }
  const Matrix& v_support() const { return v_support_; }
  Index rows() const { return probs_.rows(); }
  Index cols() const { return probs_.cols(); }
  Vector row_margin() const { return probs_.rowwise().sum(); }
  Vector col_margin() const { return probs_.colwise().sum().transpose(); }

  // X and Y exchanged.
  FiniteJoint transposed() const;

 private:
  Matrix probs_;
  Matrix z_support_;
  Matrix v_support_;
};

Matrix indicator_support(Index levels);

// log[p_jk p_00 / (p_j0 p_0k)] for j, k >= 1: a J x K matrix.
Matrix odds_ratio_matrix(const FiniteJoint& joint);
Matrix odds_ratio_matrix(const Matrix& probs);

struct IpfOptions {
  double tol = 1e-12;
  int max_iter = 100000;
  // Log row/column offsets of the starting table q_jk ∝ exp(psi_jk + r_j + c_k).
  // Any choice gives a start with the requested odds ratios.
  std::optional<Vector> init_row_log;
  std::optional<Vector> init_col_log;
};

struct IpfResult {
  Matrix probs;
  int iterations = 0;
  double margin_residual = 0.0;  // max of L-inf row and column residuals
};

// The unique table with margins pi_x, pi_y and log odds ratios psi (J x K),
// by alternating row and column scaling in log space. Throws
// ConvergenceError carrying the residuals when max_iter is exhausted.
IpfResult ipf(const Vector& pi_x, const Vector& pi_y, const Matrix& psi,
              const IpfOptions& options = {});

FiniteJoint ipf_fit(const Vector& pi_x, const Vector& pi_y, const Matrix& psi,
                    const Matrix& z_support, const Matrix& v_support,
                    const IpfOptions& options = {});

// psi_jk = psi(z_j, v_k; theta) for j, k >= 1.
Matrix model_psi_table(const AssociationModel& model, ConstVec theta, const Matrix& z_support,
                       const Matrix& v_support);

struct LogLinearParams {
  double alpha = 0.0;
  Vector beta;   // beta_1..beta_J (beta_0 = 0)
  Vector gamma;  // gamma_1..gamma_K (gamma_0 = 0)
  Matrix psi;    // J x K

  // exp(alpha + beta_j + gamma_k + psi_jk) with zero-padded row/column 0.
  Matrix reconstruct() const;
};

LogLinearParams loglinear_params(const FiniteJoint& joint);
LogLinearParams loglinear_params(const Matrix& probs);

struct RetrospectiveMixture {
  Vector p_star_x;  // J+1: sum_k rbar_k p(x_j | y_k)
  Matrix p_star;    // (J+1) x (K+1): p*_k(x_j), rows sum to one
};

RetrospectiveMixture mixture_and_conditionals(const FiniteJoint& joint, const Vector& n_vec);

Vector empirical_marginal(const Vector& counts);

// sum p log(p / q); shapes must match and q must be positive.
double kl_divergence(const Matrix& p, const Matrix& q);

}  // namespace assoc
