#include "assoc/inference.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "assoc/errors.hpp"
#include "assoc/linalg.hpp"
#include "predictor.hpp"

namespace assoc {

Matrix w_matrix(const Vector& n_vec) {
  if (n_vec.size() < 2) throw ArgumentError("w_matrix: need at least two strata");
  if (!(n_vec.minCoeff() >= 1.0)) throw ArgumentError("w_matrix: all counts must be >= 1");
  const Index k = n_vec.size() - 1;
  Matrix w = Matrix::Constant(k, k, 1.0 / n_vec[0]);
  for (Index i = 0; i < k; ++i) w(i, i) += 1.0 / n_vec[i + 1];
  return w;
}

TrueParameters true_lambda(const AssociationModel& model, const FiniteJoint& joint,
                           const Vector& n_vec, std::optional<Vector> theta) {
  if (n_vec.size() != joint.cols()) throw ArgumentError("true_lambda: n_vec size mismatch");
  if (!(n_vec.minCoeff() > 0.0)) throw ArgumentError("true_lambda: counts must be positive");
  if (joint.z_support().rows() != model.dim_x() || joint.v_support().rows() != model.dim_y()) {
    throw ArgumentError("true_lambda: joint supports do not match the model");
  }
  const Matrix psi = odds_ratio_matrix(joint);
  TrueParameters out;
  if (theta) {
    if (theta->size() != model.param_dim()) throw ArgumentError("true_lambda: theta length");
    out.lambda.theta = *theta;
  } else {
    if (!model.is_log_bilinear()) {
      throw ArgumentError("true_lambda: theta must be given for non-log-bilinear models");
    }
    const Matrix zs = model.feature_map_x() * joint.z_support();
    const Matrix vs = model.feature_map_y() * joint.v_support();
    const Index rows = model.theta_rows();
    const Index cols = model.theta_cols();
    const Index nj = joint.rows() - 1;
    const Index nk = joint.cols() - 1;
    Matrix design(nj * nk, rows * cols);
    Vector target(nj * nk);
    for (Index j = 0; j < nj; ++j) {
      for (Index k = 0; k < nk; ++k) {
        const Index r = j * nk + k;
        target[r] = psi(j, k);
        for (Index a = 0; a < rows; ++a)
          for (Index b = 0; b < cols; ++b) design(r, a * cols + b) = zs(a, j + 1) * vs(b, k + 1);
      }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < design.cols()) {
      throw IdentifiabilityError("true_lambda: theta is not identifiable from the joint's supports");
    }
    out.lambda.theta = qr.solve(target);
  }
  out.misspecification =
      (psi - model_psi_table(model, out.lambda.theta, joint.z_support(), joint.v_support()))
          .cwiseAbs()
          .maxCoeff();

  const Vector col = joint.col_margin();
  const Vector rbar = n_vec / n_vec.sum();
  const double base = std::log(rbar[0] * joint.probs()(0, 0) / col[0]);
  out.lambda.gamma_star.resize(joint.cols() - 1);
  for (Index k = 1; k < joint.cols(); ++k) {
    out.lambda.gamma_star[k - 1] = std::log(rbar[k] * joint.probs()(0, k) / col[k]) - base;
  }
  return out;
}

ExactMoments exact_moments(const AssociationModel& model, const Lambda& lambda,
                           const FiniteJoint& joint, const Vector& n_vec, double consistency_tol) {
  const Index levels = joint.cols();
  if (n_vec.size() != levels) throw ArgumentError("exact_moments: n_vec size mismatch");
  if (!(n_vec.minCoeff() > 0.0)) throw ArgumentError("exact_moments: counts must be positive");
  if (joint.z_support().rows() != model.dim_x() || joint.v_support().rows() != model.dim_y() ||
      lambda.theta.size() != model.param_dim() || lambda.gamma_star.size() != levels - 1) {
    throw ArgumentError("exact_moments: model, lambda and joint dimensions disagree");
  }
  const Matrix& zs = joint.z_support();
  const Matrix& vs = joint.v_support();
  const RetrospectiveMixture mix = mixture_and_conditionals(joint, n_vec);
  const Vector col = joint.col_margin();

  detail::Predictor pred(model, lambda, vs);
  const Index dim = pred.dim();
  ExactMoments out;
  out.info = Matrix::Zero(dim, dim);
  out.sigma = Matrix::Zero(dim, dim);
  out.info_hessian = Matrix::Zero(dim, dim);
  out.mean_score = Vector::Zero(dim);

  // Per support point: u_k(z_j) = a_k - abar for every k.
  const Index rows = joint.rows();
  std::vector<Matrix> u(static_cast<std::size_t>(rows));
  Matrix hess_terms = Matrix::Zero(dim, dim);
  std::vector<Matrix> neg_hess(static_cast<std::size_t>(rows * levels));
  for (Index j = 0; j < rows; ++j) {
    const auto z = zs.col(j);
    pred.predict(z);
    for (Index k = 0; k < levels; ++k) {
      out.consistency_residual =
          std::max(out.consistency_residual, std::abs(pred.prob()[k] - mix.p_star(j, k)));
    }
    pred.gradients(z);
    Matrix& uj = u[static_cast<std::size_t>(j)];
    uj = pred.grads().colwise() - pred.mean_grad();
    for (Index k = 0; k < levels; ++k) {
      Matrix& h = neg_hess[static_cast<std::size_t>(j * levels + k)];
      h = Matrix::Zero(dim, dim);
      pred.info_into(z, k, 1.0, h);
    }
  }
  if (!(out.consistency_residual <= consistency_tol)) {
    std::ostringstream os;
    os << "exact_moments: lambda does not reproduce the joint's conditionals (max deviation "
       << out.consistency_residual << ")";
    throw ConsistencyError(os.str());
  }

  Vector mean(dim);
  Matrix second(dim, dim);
  Matrix hsum(dim, dim);
  const auto& kt = kernels::active();
  for (Index k = 0; k < levels; ++k) {
    mean.setZero();
    second.setZero();
    hsum.setZero();
    for (Index j = 0; j < rows; ++j) {
      const double pjk = joint.probs()(j, k) / col[k];
      const Vector uk = u[static_cast<std::size_t>(j)].col(k);
      mean.noalias() += pjk * uk;
      kt.syr(pjk, uk.data(), second.data(), static_cast<std::size_t>(dim),
             static_cast<std::size_t>(dim));
      hsum.noalias() += pjk * neg_hess[static_cast<std::size_t>(j * levels + k)];
    }
    out.mean_score.noalias() += n_vec[k] * mean;
    out.info.noalias() += n_vec[k] * second;
    out.sigma.noalias() += n_vec[k] * (second - mean * mean.transpose());
    out.info_hessian.noalias() += n_vec[k] * hsum;
  }
  out.info = 0.5 * (out.info + out.info.transpose()).eval();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  out.info_hessian = 0.5 * (out.info_hessian + out.info_hessian.transpose()).eval();
  return out;
}

double w_identity_residual(const Matrix& info, const Matrix& sigma, const Matrix& w) {
  const Index dim = info.rows();
  const Index k = w.rows();
  if (info.cols() != dim || sigma.rows() != dim || sigma.cols() != dim || w.cols() != k ||
      k > dim) {
    throw ArgumentError("w_identity_residual: matrices do not conform");
  }
  const Index s = dim - k;
  // I * diag(0, W) * I = I[:, gamma] W I[gamma, :]
  const Matrix rhs = info.rightCols(k) * w * info.bottomRows(k);
  const Matrix diff = (info - sigma) - rhs;
  (void)s;
  return norm_inf(diff) / std::max(1.0, norm_inf(info));
}

SandwichResult sandwich_cov(const Matrix& info, const Matrix& sigma, Index theta_dim) {
  if (info.rows() != sigma.rows() || info.cols() != sigma.cols() || theta_dim > info.rows()) {
    throw ArgumentError("sandwich_cov: matrices do not conform");
  }
  const Matrix inv = inverse_spd(info, "sandwich_cov: expected information");
  SandwichResult out;
  out.cov = inv * sigma * inv;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  if (theta_dim > 0) {
    const Matrix a = inv.topLeftCorner(theta_dim, theta_dim);
    const Matrix b = out.cov.topLeftCorner(theta_dim, theta_dim);
    out.theta_block_gap = (a - b).cwiseAbs().maxCoeff() / std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  }
  return out;
}

Matrix wald_cov(const FitReport& fit) {
  if (!fit.converged) throw ConvergenceError("wald_cov: fit did not converge");
  const Index s = fit.theta_dim();
  const Matrix inv = inverse_spd(fit.observed_info_at_hat, "wald_cov: observed information");
  return inv.topLeftCorner(s, s);
}

WaldTest wald_test(const FitReport& fit, const Matrix& c) {
  const Index s = fit.theta_dim();
  if (c.cols() != s || c.rows() < 1) {
    std::ostringstream os;
    os << "wald_test: hypothesis matrix must have " << s << " columns";
    throw ArgumentError(os.str());
  }
  if (numerical_rank(c) < c.rows()) {
    throw ArgumentError("wald_test: hypothesis matrix does not have full row rank");
  }
  const Matrix cov = wald_cov(fit);
  const Vector ct = c * fit.lambda_hat.theta;
  const Matrix m = c * cov * c.transpose();
  const Matrix minv = inverse_spd(0.5 * (m + m.transpose()), "wald_test: C V C^T");
  WaldTest out;
  out.statistic = ct.dot(minv * ct);
  out.df = c.rows();
  out.p_value = chi_squared_sf(out.statistic, static_cast<double>(out.df));
  return out;
}

std::vector<Interval> conf_intervals(const Vector& estimate, const Matrix& cov, double level) {
  if (!(level >= 0.0 && level < 1.0)) {
    throw ArgumentError("conf_intervals: level must lie in [0, 1)");
  }
  if (cov.rows() != estimate.size() || cov.cols() != estimate.size()) {
    throw ArgumentError("conf_intervals: covariance shape mismatch");
  }
  const double z = level == 0.0 ? 0.0 : normal_quantile(0.5 * (1.0 + level));
  std::vector<Interval> out;
  out.reserve(static_cast<std::size_t>(estimate.size()));
  for (Index i = 0; i < estimate.size(); ++i) {
    const double var = cov(i, i);
    if (var < 0.0) throw ArgumentError("conf_intervals: negative variance");
    const double half = z * std::sqrt(var);
    out.push_back({estimate[i], estimate[i] - half, estimate[i] + half});
  }
  return out;
}

std::vector<Interval> conf_intervals(const FitReport& fit, double level) {
  return conf_intervals(fit.lambda_hat.theta, wald_cov(fit), level);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw ArgumentError("normal_quantile: p must lie in [0, 1]");
  }
  // Acklam's rational approximation (relative error < 1.15e-9).
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double chi_squared_sf(double x, double df) {
  if (!(df > 0.0)) throw ArgumentError("chi_squared_sf: df must be positive");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace assoc
