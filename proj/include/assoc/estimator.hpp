#pragma once

#include <optional>
#include <string>
#include <vector>

#include "assoc/likelihood.hpp"

namespace assoc {

struct FitOptions {
  double grad_tol = 1e-8;        // on ||score||_inf
  double step_tol = 1e-9;        // on ||Newton step||_inf
  int max_iter = 100;
  int max_step_halvings = 30;
  double divergence_bound = 1e4;  // ||lambda||_inf beyond this is a divergent path
  std::optional<Vector> init_theta;
  std::optional<Vector> init_gamma;
};

enum class Severity { info, warning, error };

struct Diagnostic {
  std::string code;  // e.g. "outcome_rank", "covariate_rank", "gradient_rank"
  Severity severity = Severity::info;
  std::string message;
};

const char* severity_name(Severity s);

struct FitReport {
  Lambda lambda_hat;
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double loglik_at_hat = 0.0;
  Matrix observed_info_at_hat;  // theta block first, then the nuisance block
  std::vector<Diagnostic> diagnostics;
  std::vector<double> loglik_trace;
  Vector n_vec;                // stratum sizes of the fitted likelihood
  char conditioning = 'y';     // 'y': strata are outcome levels; 'x': reverse fit

  Index theta_dim() const { return lambda_hat.theta.size(); }
};

// A (J+1) x (K+1) table of cell counts with the feature vectors of its rows
// (z_support, dim_x x (J+1)) and columns (v_support, dim_y x (K+1)). Row and
// column 0 are the reference levels; their feature vectors must be zero.
struct ContingencyTable {
  Matrix counts;
  Matrix z_support;
  Matrix v_support;

  void validate() const;
};

// Columns are the strata (sampling conditional on Y).
ConditionalDataset strata_by_column(const ContingencyTable& table);
// Rows are the strata (sampling conditional on X); z and v swap roles.
ConditionalDataset strata_by_row(const ContingencyTable& table);

// Damped Newton ascent of the conditional log-likelihood. Throws
// DivergenceError when no maximizer exists (separation),
// IdentifiabilityError for rank-deficient designs or information, and
// ConvergenceError when the iteration budget runs out.
FitReport fit(const AssociationModel& model, const ConditionalDataset& data,
              const FitOptions& options = {});

// Fit with rows as strata, using the dual model; theta and the theta block of
// the information are mapped back to the forward parametrization.
FitReport fit_reverse(const AssociationModel& model, const ContingencyTable& table,
                      const FitOptions& options = {});

struct LogLinearOptions {
  FitOptions solver;
  bool freeze_theta = false;  // fit only the margins with theta held at frozen_theta
  std::optional<Vector> frozen_theta;
};

struct LogLinearFit {
  Vector theta;
  Vector beta;   // beta_1..beta_J
  Vector gamma;  // gamma_1..gamma_K
  double alpha = 0.0;
  Matrix fitted;     // fitted cell probabilities
  Matrix cov_theta;  // theta block of the inverse multinomial information
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Multinomial maximum likelihood for log p_jk = alpha + beta_j + gamma_k +
// psi(z_j, v_k; theta) over the whole table.
LogLinearFit fit_loglinear(const AssociationModel& model, const ContingencyTable& table,
                           const LogLinearOptions& options = {});

// Rank and moment surrogates for the identifiability and moment conditions.
// Severity::error entries make fit() throw IdentifiabilityError.
std::vector<Diagnostic> check_conditions(const AssociationModel& model,
                                         const ConditionalDataset& data,
                                         std::optional<Vector> theta = std::nullopt);

}  // namespace assoc
