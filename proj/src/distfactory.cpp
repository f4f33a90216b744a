#include "assoc/distfactory.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "assoc/errors.hpp"
#include "assoc/kernels.hpp"

namespace assoc {

namespace {

void require_prob_vector(const Vector& p, const char* name) {
  if (p.size() < 2) throw ArgumentError(std::string(name) + ": need at least two categories");
  if (!p.allFinite() || !(p.minCoeff() > 0.0)) {
    throw ArgumentError(std::string(name) + ": entries must be strictly positive");
  }
  if (std::abs(p.sum() - 1.0) > 1e-12) {
    std::ostringstream os;
    os << name << ": entries sum to " << p.sum() << ", not 1";
    throw ArgumentError(os.str());
  }
}

}  // namespace

FiniteJoint::FiniteJoint(Matrix probs, Matrix z_support, Matrix v_support)
    : probs_(std::move(probs)), z_support_(std::move(z_support)), v_support_(std::move(v_support)) {
  if (probs_.rows() < 2 || probs_.cols() < 2) {
    throw ArgumentError("FiniteJoint: need at least a 2 x 2 table");
  }
  if (!probs_.allFinite() || !(probs_.minCoeff() > 0.0)) {
    throw ArgumentError("FiniteJoint: all cell probabilities must be strictly positive");
  }
  if (std::abs(probs_.sum() - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "FiniteJoint: probabilities sum to " << probs_.sum();
    throw ArgumentError(os.str());
  }
  if (z_support_.cols() != probs_.rows() || v_support_.cols() != probs_.cols()) {
    throw ArgumentError("FiniteJoint: support sizes do not match the table");
  }
  if (z_support_.rows() < 1 || v_support_.rows() < 1) {
    throw ArgumentError("FiniteJoint: feature dimension must be >= 1");
  }
  if (!z_support_.col(0).isZero(0.0) || !v_support_.col(0).isZero(0.0)) {
    throw ArgumentError("FiniteJoint: reference support points (index 0) must be zero vectors");
  }
}

Matrix indicator_support(Index levels) {
  if (levels < 2) throw ArgumentError("indicator_support: need at least two levels");
  Matrix s = Matrix::Zero(levels - 1, levels);
  for (Index j = 1; j < levels; ++j) s(j - 1, j) = 1.0;
  return s;
}

FiniteJoint FiniteJoint::with_indicator_supports(Matrix probs) {
  Matrix z = indicator_support(probs.rows());
  Matrix v = indicator_support(probs.cols());
  return FiniteJoint(std::move(probs), std::move(z), std::move(v));
}

FiniteJoint FiniteJoint::transposed() const {
  return FiniteJoint(probs_.transpose(), v_support_, z_support_);
}

Matrix odds_ratio_matrix(const Matrix& probs) {
  const Index j1 = probs.rows() - 1;
  const Index k1 = probs.cols() - 1;
  Matrix out(j1, k1);
  const double l00 = std::log(probs(0, 0));
  for (Index j = 1; j <= j1; ++j) {
    const double lj0 = std::log(probs(j, 0));
    for (Index k = 1; k <= k1; ++k) {
      out(j - 1, k - 1) = std::log(probs(j, k)) + l00 - lj0 - std::log(probs(0, k));
    }
  }
  return out;
}

Matrix odds_ratio_matrix(const FiniteJoint& joint) { return odds_ratio_matrix(joint.probs()); }

IpfResult ipf(const Vector& pi_x, const Vector& pi_y, const Matrix& psi, const IpfOptions& options) {
  require_prob_vector(pi_x, "ipf: pi_x");
  require_prob_vector(pi_y, "ipf: pi_y");
  const Index rows = pi_x.size();
  const Index cols = pi_y.size();
  if (psi.rows() != rows - 1 || psi.cols() != cols - 1) {
    std::ostringstream os;
    os << "ipf: psi must be " << rows - 1 << " x " << cols - 1;
    throw ArgumentError(os.str());
  }
  if (!psi.allFinite()) throw ArgumentError("ipf: psi must be finite");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor lpsi = RowMajor::Zero(rows, cols);
  lpsi.bottomRightCorner(rows - 1, cols - 1) = psi;
  const RowMajor lpsi_t = lpsi.transpose();

  Vector r = options.init_row_log.value_or(Vector::Zero(rows));
  Vector c = options.init_col_log.value_or(Vector::Zero(cols));
  if (r.size() != rows || c.size() != cols || !r.allFinite() || !c.allFinite()) {
    throw ArgumentError("ipf: initial offsets have the wrong size or are not finite");
  }
  const Vector log_px = pi_x.array().log();
  const Vector log_py = pi_y.array().log();

  std::vector<double> buf(static_cast<std::size_t>(std::max(rows, cols)));
  const auto row_step = [&] {
    for (Index j = 0; j < rows; ++j) {
      const double* row = lpsi.row(j).data();
      for (Index k = 0; k < cols; ++k) buf[static_cast<std::size_t>(k)] = row[k] + c[k];
      r[j] = log_px[j] - kernels::log_sum_exp({buf.data(), static_cast<std::size_t>(cols)});
    }
  };
  const auto col_step = [&] {
    for (Index k = 0; k < cols; ++k) {
      const double* col = lpsi_t.row(k).data();
      for (Index j = 0; j < rows; ++j) buf[static_cast<std::size_t>(j)] = col[j] + r[j];
      c[k] = log_py[k] - kernels::log_sum_exp({buf.data(), static_cast<std::size_t>(rows)});
    }
  };
  const auto table = [&] {
    Matrix p(rows, cols);
    for (Index j = 0; j < rows; ++j)
      for (Index k = 0; k < cols; ++k) p(j, k) = std::exp(lpsi(j, k) + r[j] + c[k]);
    return p;
  };
  const auto residual = [&](const Matrix& p) {
    const double rr = (p.rowwise().sum() - pi_x).cwiseAbs().maxCoeff();
    const double cr = (p.colwise().sum().transpose() - pi_y).cwiseAbs().maxCoeff();
    return std::max(rr, cr);
  };

  IpfResult out;
  for (int it = 1; it <= options.max_iter; ++it) {
    row_step();
    col_step();
    out.probs = table();
    out.margin_residual = residual(out.probs);
    out.iterations = it;
    if (out.margin_residual <= options.tol) return out;
  }
  std::ostringstream os;
  os << "ipf: no convergence after " << options.max_iter << " sweeps; margin residual "
     << out.margin_residual << " > tol " << options.tol;
  throw ConvergenceError(os.str());
}

FiniteJoint ipf_fit(const Vector& pi_x, const Vector& pi_y, const Matrix& psi,
                    const Matrix& z_support, const Matrix& v_support, const IpfOptions& options) {
  IpfResult res = ipf(pi_x, pi_y, psi, options);
  // Renormalize the last rounding bits so the table sums to one.
  res.probs /= res.probs.sum();
  return FiniteJoint(std::move(res.probs), z_support, v_support);
}

Matrix model_psi_table(const AssociationModel& model, ConstVec theta, const Matrix& z_support,
                       const Matrix& v_support) {
  if (z_support.rows() != model.dim_x() || v_support.rows() != model.dim_y()) {
    throw ArgumentError("model_psi_table: support dimensions do not match the model");
  }
  Matrix psi(z_support.cols() - 1, v_support.cols() - 1);
  for (Index j = 1; j < z_support.cols(); ++j)
    for (Index k = 1; k < v_support.cols(); ++k)
      psi(j - 1, k - 1) = model.psi(z_support.col(j), v_support.col(k), theta);
  return psi;
}

Matrix LogLinearParams::reconstruct() const {
  const Index rows = beta.size() + 1;
  const Index cols = gamma.size() + 1;
  Matrix p(rows, cols);
  for (Index j = 0; j < rows; ++j) {
    for (Index k = 0; k < cols; ++k) {
      double e = alpha;
      if (j > 0) e += beta[j - 1];
      if (k > 0) e += gamma[k - 1];
      if (j > 0 && k > 0) e += psi(j - 1, k - 1);
      p(j, k) = std::exp(e);
    }
  }
  return p;
}

LogLinearParams loglinear_params(const Matrix& probs) {
  LogLinearParams out;
  const double l00 = std::log(probs(0, 0));
  out.alpha = l00;
  out.beta.resize(probs.rows() - 1);
  out.gamma.resize(probs.cols() - 1);
  for (Index j = 1; j < probs.rows(); ++j) out.beta[j - 1] = std::log(probs(j, 0)) - l00;
  for (Index k = 1; k < probs.cols(); ++k) out.gamma[k - 1] = std::log(probs(0, k)) - l00;
  out.psi = odds_ratio_matrix(probs);
  return out;
}

LogLinearParams loglinear_params(const FiniteJoint& joint) { return loglinear_params(joint.probs()); }

RetrospectiveMixture mixture_and_conditionals(const FiniteJoint& joint, const Vector& n_vec) {
  if (n_vec.size() != joint.cols()) {
    throw ArgumentError("mixture_and_conditionals: n_vec must have one entry per column");
  }
  if (!(n_vec.minCoeff() > 0.0)) {
    throw ArgumentError("mixture_and_conditionals: counts must be positive");
  }
  const Vector rbar = n_vec / n_vec.sum();
  const Vector col = joint.col_margin();
  Matrix weighted(joint.rows(), joint.cols());
  for (Index k = 0; k < joint.cols(); ++k) {
    weighted.col(k) = joint.probs().col(k) * (rbar[k] / col[k]);
  }
  RetrospectiveMixture out;
  out.p_star_x = weighted.rowwise().sum();
  out.p_star = weighted.array().colwise() / out.p_star_x.array();
  return out;
}

Vector empirical_marginal(const Vector& counts) {
  if (counts.size() == 0 || !counts.allFinite() || counts.minCoeff() < 0.0) {
    throw ArgumentError("empirical_marginal: counts must be nonnegative");
  }
  const double n = counts.sum();
  if (!(n > 0.0)) throw ArgumentError("empirical_marginal: total count is zero");
  return counts / n;
}

double kl_divergence(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw ArgumentError("kl_divergence: shape mismatch");
  }
  if (!(q.minCoeff() > 0.0)) throw ArgumentError("kl_divergence: q must be strictly positive");
  if (p.minCoeff() < 0.0) throw ArgumentError("kl_divergence: p must be nonnegative");
  double s = 0.0;
  for (Index k = 0; k < p.cols(); ++k)
    for (Index j = 0; j < p.rows(); ++j)
      if (p(j, k) > 0.0) s += p(j, k) * std::log(p(j, k) / q(j, k));
  return s;
}

}  // namespace assoc
