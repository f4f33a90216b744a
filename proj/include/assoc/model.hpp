#pragma once

// Parametric association families: the log odds ratio psi_theta(x, y) is
// G(z, v, theta) with z = h_X(x), v = h_Y(y). The library only ever sees the
// feature vectors z and v; the reference points x°, y° are whatever the
// caller maps to the zero vector, so G(0, v, .) = G(z, 0, .) = 0.
//
// Matrix-valued theta (log-bilinear families) is flattened row-major into the
// parameter vector: theta[a * cols + b] is entry (a, b).

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace assoc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVec = Eigen::Ref<const Eigen::VectorXd>;

enum class ModelKind {
  log_bilinear,
  glm_canonical,
  multinomial_logit,
  mv_linear,
  restricted,
  general,
};

const char* model_kind_name(ModelKind kind);

// A user-supplied G with its theta-derivatives. `third` and the envelopes are
// optional; leave them empty to opt out.
struct GeneralModelSpec {
  Index param_dim = 0;
  Index dim_x = 0;
  Index dim_y = 0;
  std::function<double(ConstVec z, ConstVec v, ConstVec theta)> g;
  std::function<Vector(ConstVec z, ConstVec v, ConstVec theta)> grad;
  std::function<Matrix(ConstVec z, ConstVec v, ConstVec theta)> hess;
  // third(z, v, theta)[r](s, t) = d^3 G / d theta_r d theta_s d theta_t
  std::function<std::vector<Matrix>(ConstVec z, ConstVec v, ConstVec theta)> third;
  std::function<double(ConstVec z)> envelope_x;
  std::function<double(ConstVec v)> envelope_y;
  std::string name = "general";
};

class AssociationModel {
 public:
  static AssociationModel general(GeneralModelSpec spec);

  Index param_dim() const;
  Index dim_x() const;
  Index dim_y() const;
  ModelKind kind() const;

  // Log-bilinear families: psi = (A z)^T Theta (B v) with Theta of shape
  // theta_rows() x theta_cols(). A and B are identities unless restricted.
  bool is_log_bilinear() const;
  const Matrix& feature_map_x() const;
  const Matrix& feature_map_y() const;
  Index theta_rows() const;
  Index theta_cols() const;

  // Checked evaluators; throw ArgumentError on dimension mismatch.
  double psi(ConstVec z, ConstVec v, ConstVec theta) const;
  Vector grad(ConstVec z, ConstVec v, ConstVec theta) const;
  Matrix hess(ConstVec z, ConstVec v, ConstVec theta) const;
  bool has_third() const;
  std::vector<Matrix> third(ConstVec z, ConstVec v, ConstVec theta) const;

  // True when every second theta-derivative is identically zero.
  bool hess_vanishes() const;

  bool has_envelopes() const;
  // psi~_X(z) + psi~_Y(v); multiply by ||theta|| for the bound on |psi|.
  double envelope(ConstVec z, ConstVec v) const;

  // Unchecked variants for inner loops. grad_into writes param_dim() values;
  // add_hess accumulates weight * hess into out(offset.., offset..).
  double psi_unchecked(ConstVec z, ConstVec v, ConstVec theta) const;
  void grad_into(ConstVec z, ConstVec v, ConstVec theta, double* out) const;
  void add_hess(ConstVec z, ConstVec v, ConstVec theta, double weight, Matrix& out,
                Index offset = 0) const;

  // The same association seen with X and Y exchanged: dual.psi(v, z, t') ==
  // psi(z, v, t) where t' = theta_to_dual(t). For log-bilinear families t' is
  // the transpose of Theta.
  AssociationModel dual() const;
  Vector theta_to_dual(ConstVec theta) const;
  Vector theta_from_dual(ConstVec dual_theta) const;

  // "theta[a,b]" for log-bilinear families, "theta[r]" otherwise.
  std::string param_name(Index r) const;

 private:
  struct Impl;
  explicit AssociationModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  friend AssociationModel make_bilinear_impl(ModelKind, Matrix, Matrix, Index, Index);

  std::shared_ptr<const Impl> impl_;
};

double eval_psi(const AssociationModel& model, ConstVec z, ConstVec v, ConstVec theta);

AssociationModel make_log_bilinear(Index k_x, Index k_y);

// Canonical-link GLM: v = y - y° is scalar, psi = z^T theta (y - y°), and
// theta = beta / a(phi). Logistic and Poisson regressions have a(phi) = 1.
AssociationModel make_glm_canonical(Index k_x);
Vector glm_theta_from_beta(ConstVec beta, double dispersion);

// Linear logistic regression with n_classes = K + 1 outcome classes. Class 0
// is the reference (zero feature vector); class k > 0 maps to unit vector e_k.
// Theta is k_x x K with column k holding theta_k.
AssociationModel make_multinomial_logit(Index k_x, Index n_classes);
Vector multinomial_class_features(Index n_classes, Index k);

// Multivariate normal regression E[Y|x] = alpha + beta^T z with residual
// covariance sigma: log-bilinear in (z, y) with Theta = beta * sigma^-1.
struct RegressionAssociation {
  AssociationModel model;
  Vector theta;
};
RegressionAssociation make_mv_linear(const Matrix& beta, const Matrix& sigma);

// Submodel Theta = A^T Theta* B of a log-bilinear family, reparametrized by
// Theta*. Equivalent to a log-bilinear family on features A z and B v.
AssociationModel restrict_bilinear(const AssociationModel& base, const Matrix& a, const Matrix& b);

// Theta = A^T Theta* B for a restricted model's parameter, flattened.
Vector expand_restricted_theta(const Matrix& a, const Matrix& b, ConstVec theta_star);

}  // namespace assoc
