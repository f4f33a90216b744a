#pragma once

// Conditional ("reverse") log-likelihood for samples drawn within outcome
// strata y_0..y_K, parametrized by lambda = (theta, gamma*). The parameter
// vector is always ordered theta block first, then gamma*_1..gamma*_K;
// gamma*_0 = 0 for the reference stratum and is never stored.

#include <vector>

#include "assoc/model.hpp"

namespace assoc {

struct Lambda {
  Vector theta;
  Vector gamma_star;  // gamma*_1 .. gamma*_K

  Index size() const { return theta.size() + gamma_star.size(); }
  Vector stacked() const;
  static Lambda from_stacked(const Vector& stacked, Index theta_dim);
};

// Distinct covariate vectors of one stratum with their multiplicities.
struct Stratum {
  Matrix z;       // dim_x x m, column i is one distinct z
  Vector weight;  // m positive counts

  double count() const { return weight.sum(); }
  Index distinct() const { return z.cols(); }
};

class ConditionalDataset {
 public:
  // v_levels is dim_y x (K+1), column k = v_k; column 0 must be exactly zero.
  // Duplicate z columns within a stratum are merged and columns are sorted,
  // so the dataset is canonical regardless of input order.
  ConditionalDataset(Matrix v_levels, std::vector<Stratum> strata);

  static ConditionalDataset from_observations(Matrix v_levels,
                                              const std::vector<std::vector<Vector>>& observations);

  Index num_levels() const { return v_levels_.cols(); }
  Index num_nuisance() const { return v_levels_.cols() - 1; }
  Index dim_x() const { return dim_x_; }
  Index dim_y() const { return v_levels_.rows(); }
  const Matrix& v_levels() const { return v_levels_; }
  const Stratum& stratum(Index k) const { return strata_[static_cast<std::size_t>(k)]; }
  const std::vector<Stratum>& strata() const { return strata_; }
  Vector counts() const;
  double total() const;

 private:
  Matrix v_levels_;
  std::vector<Stratum> strata_;
  Index dim_x_ = 0;
};

// p*_k(z) for k = 0..K via max-shifted softmax of gamma*_k + psi(z, v_k).
Vector cond_prob(const AssociationModel& model, const Lambda& lambda, const Matrix& v_levels,
                 ConstVec z);

double loglik(const AssociationModel& model, const Lambda& lambda, const ConditionalDataset& data);
Vector score(const AssociationModel& model, const Lambda& lambda, const ConditionalDataset& data);
// J(lambda) = -d^2 loglik, exact analytic assembly.
Matrix observed_info(const AssociationModel& model, const Lambda& lambda,
                     const ConditionalDataset& data);

struct LikelihoodTerms {
  double loglik = 0.0;
  Vector score;  // empty unless requested
  Matrix info;   // empty unless requested
};

enum class Need { value, score, info };

// One pass computing the log-likelihood and optionally score and J.
LikelihoodTerms evaluate(const AssociationModel& model, const Lambda& lambda,
                         const ConditionalDataset& data, Need need);

// Throws ArgumentError unless model, lambda and data dimensions agree.
void check_compatible(const AssociationModel& model, const Lambda& lambda,
                      const ConditionalDataset& data);

}  // namespace assoc
