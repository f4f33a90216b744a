#pragma once

// Per-observation pieces of the conditional likelihood shared by the
// likelihood, moment and log-linear code.

#include <cmath>
#include <limits>
#include <sstream>

#include "assoc/errors.hpp"
#include "assoc/kernels.hpp"
#include "assoc/likelihood.hpp"

namespace assoc::detail {

// Linear predictors eta_l = gamma*_l + psi(z, v_l), the softmax p, and the
// lambda-gradients a_l = d eta_l / d lambda for one covariate vector z.
class Predictor {
 public:
  Predictor(const AssociationModel& model, const Lambda& lambda, const Matrix& v_levels)
      : model_(model),
        lambda_(lambda),
        v_levels_(v_levels),
        levels_(v_levels.cols()),
        s_(model.param_dim()),
        dim_(model.param_dim() + v_levels.cols() - 1),
        eta_(levels_),
        p_(levels_),
        a_(dim_, levels_),
        abar_(dim_),
        centered_(dim_) {}

  Index levels() const { return levels_; }
  Index dim() const { return dim_; }

  // Fills eta and p; returns log-sum-exp of eta.
  double predict(ConstVec z) {
    for (Index l = 0; l < levels_; ++l) {
      const double g = l == 0 ? 0.0 : lambda_.gamma_star[l - 1];
      eta_[l] = g + model_.psi_unchecked(z, v_levels_.col(l), lambda_.theta);
      if (!std::isfinite(eta_[l])) {
        std::ostringstream os;
        os << "non-finite linear predictor in stratum " << l;
        throw EvaluationError(os.str(), static_cast<long>(l));
      }
    }
    lse_ = kernels::softmax({eta_.data(), static_cast<std::size_t>(levels_)},
                            {p_.data(), static_cast<std::size_t>(levels_)});
    return lse_;
  }

  // Requires predict(z) first. Fills a_l and abar = sum_l p_l a_l.
  void gradients(ConstVec z) {
    a_.setZero();
    for (Index l = 0; l < levels_; ++l) {
      model_.grad_into(z, v_levels_.col(l), lambda_.theta, a_.col(l).data());
      if (l > 0) a_(s_ + l - 1, l) = 1.0;
    }
    abar_.noalias() = a_ * p_;
  }

  double log_prob(Index k) const { return eta_[k] - lse_; }
  const Vector& eta() const { return eta_; }
  const Vector& prob() const { return p_; }
  const Matrix& grads() const { return a_; }
  const Vector& mean_grad() const { return abar_; }

  // d log p*_k / d lambda = a_k - abar
  void score_into(Index k, double weight, Vector& out) const {
    kernels::axpy(weight, {a_.col(k).data(), static_cast<std::size_t>(dim_)},
                  {out.data(), static_cast<std::size_t>(dim_)});
    kernels::axpy(-weight, {abar_.data(), static_cast<std::size_t>(dim_)},
                  {out.data(), static_cast<std::size_t>(dim_)});
  }

  // weight * (-d^2 log p*_k / d lambda^2) added to out:
  //   sum_l p_l (a_l - abar)(a_l - abar)^T + sum_l p_l H_l - H_k
  // with H_l the theta-Hessian of psi(z, v_l).
  void info_into(ConstVec z, Index k, double weight, Matrix& out) {
    const auto& kt = kernels::active();
    for (Index l = 0; l < levels_; ++l) {
      const double pl = p_[l];
      if (pl == 0.0) continue;
      centered_ = a_.col(l) - abar_;
      kt.syr(weight * pl, centered_.data(), out.data(), static_cast<std::size_t>(dim_),
             static_cast<std::size_t>(out.rows()));
    }
    if (!model_.hess_vanishes()) {
      for (Index l = 0; l < levels_; ++l) {
        model_.add_hess(z, v_levels_.col(l), lambda_.theta, weight * p_[l], out);
      }
      model_.add_hess(z, v_levels_.col(k), lambda_.theta, -weight, out);
    }
  }

 private:
  const AssociationModel& model_;
  const Lambda& lambda_;
  const Matrix& v_levels_;
  Index levels_;
  Index s_;
  Index dim_;
  Vector eta_;
  Vector p_;
  Matrix a_;
  Vector abar_;
  Vector centered_;
  double lse_ = 0.0;
};

}  // namespace assoc::detail
