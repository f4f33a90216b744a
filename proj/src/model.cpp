#include "assoc/model.hpp"

#include <cmath>
#include <sstream>

#include "assoc/errors.hpp"
#include "assoc/kernels.hpp"

namespace assoc {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::log_bilinear:
      return "log_bilinear";
    case ModelKind::glm_canonical:
      return "glm_canonical";
    case ModelKind::multinomial_logit:
      return "multinomial_logit";
    case ModelKind::mv_linear:
      return "mv_linear";
    case ModelKind::restricted:
      return "restricted";
    case ModelKind::general:
      return "general";
  }
  return "unknown";
}

struct AssociationModel::Impl {
  ModelKind kind = ModelKind::general;
  Index param_dim = 0;
  Index dim_x = 0;
  Index dim_y = 0;

  // Log-bilinear representation.
  bool bilinear = false;
  Matrix a;  // theta_rows x dim_x
  Matrix b;  // theta_cols x dim_y
  bool a_identity = false;
  bool b_identity = false;

  GeneralModelSpec general;

  Index rows() const { return a.rows(); }
  Index cols() const { return b.rows(); }
};

namespace {

bool is_identity(const Matrix& m) {
  return m.rows() == m.cols() && m.isIdentity(0.0);
}

void check_dims(const AssociationModel& m, ConstVec z, ConstVec v, ConstVec theta) {
  if (z.size() != m.dim_x() || v.size() != m.dim_y() || theta.size() != m.param_dim()) {
    std::ostringstream os;
    os << "dimension mismatch: model expects (z " << m.dim_x() << ", v " << m.dim_y()
       << ", theta " << m.param_dim() << "), got (" << z.size() << ", " << v.size() << ", "
       << theta.size() << ")";
    throw ArgumentError(os.str());
  }
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

AssociationModel make_bilinear_impl(ModelKind kind, Matrix a, Matrix b, Index dim_x, Index dim_y) {
  auto impl = std::make_shared<AssociationModel::Impl>();
  impl->kind = kind;
  impl->bilinear = true;
  impl->dim_x = dim_x;
  impl->dim_y = dim_y;
  impl->a_identity = is_identity(a);
  impl->b_identity = is_identity(b);
  impl->param_dim = a.rows() * b.rows();
  impl->a = std::move(a);
  impl->b = std::move(b);
  return AssociationModel(std::move(impl));
}

AssociationModel AssociationModel::general(GeneralModelSpec spec) {
  if (spec.param_dim < 1 || spec.dim_x < 1 || spec.dim_y < 1) {
    throw ArgumentError("general model: dimensions must be positive");
  }
  if (!spec.g || !spec.grad || !spec.hess) {
    throw ArgumentError("general model: g, grad and hess are required");
  }
  if (static_cast<bool>(spec.envelope_x) != static_cast<bool>(spec.envelope_y)) {
    throw ArgumentError("general model: supply both envelopes or neither");
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = ModelKind::general;
  impl->param_dim = spec.param_dim;
  impl->dim_x = spec.dim_x;
  impl->dim_y = spec.dim_y;
  impl->general = std::move(spec);
  return AssociationModel(std::move(impl));
}

Index AssociationModel::param_dim() const { return impl_->param_dim; }
Index AssociationModel::dim_x() const { return impl_->dim_x; }
Index AssociationModel::dim_y() const { return impl_->dim_y; }
ModelKind AssociationModel::kind() const { return impl_->kind; }
bool AssociationModel::is_log_bilinear() const { return impl_->bilinear; }

const Matrix& AssociationModel::feature_map_x() const {
  if (!impl_->bilinear) throw ArgumentError("feature_map_x: model is not log-bilinear");
  return impl_->a;
}

const Matrix& AssociationModel::feature_map_y() const {
  if (!impl_->bilinear) throw ArgumentError("feature_map_y: model is not log-bilinear");
  return impl_->b;
}

Index AssociationModel::theta_rows() const {
  return impl_->bilinear ? impl_->rows() : impl_->param_dim;
}

Index AssociationModel::theta_cols() const { return impl_->bilinear ? impl_->cols() : 1; }

double AssociationModel::psi(ConstVec z, ConstVec v, ConstVec theta) const {
  check_dims(*this, z, v, theta);
  return psi_unchecked(z, v, theta);
}

Vector AssociationModel::grad(ConstVec z, ConstVec v, ConstVec theta) const {
  check_dims(*this, z, v, theta);
  Vector out(param_dim());
  grad_into(z, v, theta, out.data());
  return out;
}

Matrix AssociationModel::hess(ConstVec z, ConstVec v, ConstVec theta) const {
  check_dims(*this, z, v, theta);
  Matrix out = Matrix::Zero(param_dim(), param_dim());
  add_hess(z, v, theta, 1.0, out);
  return out;
}

bool AssociationModel::has_third() const {
  return impl_->bilinear || static_cast<bool>(impl_->general.third);
}

std::vector<Matrix> AssociationModel::third(ConstVec z, ConstVec v, ConstVec theta) const {
  check_dims(*this, z, v, theta);
  if (impl_->bilinear) {
    return std::vector<Matrix>(static_cast<std::size_t>(param_dim()),
                               Matrix::Zero(param_dim(), param_dim()));
  }
  if (!impl_->general.third) throw ArgumentError("model does not provide third derivatives");
  return impl_->general.third(z, v, theta);
}

bool AssociationModel::hess_vanishes() const { return impl_->bilinear; }

bool AssociationModel::has_envelopes() const {
  return impl_->bilinear || static_cast<bool>(impl_->general.envelope_x);
}

double AssociationModel::envelope(ConstVec z, ConstVec v) const {
  if (impl_->bilinear) {
    // |(Az)^T T (Bv)| <= ||Az|| ||Bv|| ||T||_F and 2ab <= a^2 + b^2.
    const double nz = impl_->a_identity ? z.norm() : (impl_->a * z).norm();
    const double nv = impl_->b_identity ? v.norm() : (impl_->b * v).norm();
    return nz * nz + nv * nv;
  }
  if (!impl_->general.envelope_x) throw ArgumentError("model has no envelope functions");
  return impl_->general.envelope_x(z) + impl_->general.envelope_y(v);
}

double AssociationModel::psi_unchecked(ConstVec z, ConstVec v, ConstVec theta) const {
  const Impl& m = *impl_;
  if (!m.bilinear) return m.general.g(z, v, theta);
  const Index rows = m.rows();
  const Index cols = m.cols();
  Vector za_buf;
  Vector vb_buf;
  const double* za = z.data();
  const double* vb = v.data();
  if (!m.a_identity) {
    za_buf = m.a * z;
    za = za_buf.data();
  }
  if (!m.b_identity) {
    vb_buf = m.b * v;
    vb = vb_buf.data();
  }
  const auto& k = kernels::active();
  double s = 0.0;
  for (Index r = 0; r < rows; ++r) {
    if (za[r] == 0.0) continue;
    s += za[r] * k.dot(theta.data() + r * cols, vb, static_cast<std::size_t>(cols));
  }
  return s;
}

void AssociationModel::grad_into(ConstVec z, ConstVec v, ConstVec theta, double* out) const {
  const Impl& m = *impl_;
  if (!m.bilinear) {
    const Vector g = m.general.grad(z, v, theta);
    std::copy(g.data(), g.data() + g.size(), out);
    return;
  }
  const Index rows = m.rows();
  const Index cols = m.cols();
  Vector za = m.a_identity ? Vector(z) : Vector(m.a * z);
  Vector vb = m.b_identity ? Vector(v) : Vector(m.b * v);
  for (Index r = 0; r < rows; ++r) {
    double* row = out + r * cols;
    for (Index c = 0; c < cols; ++c) row[c] = za[r] * vb[c];
  }
}

void AssociationModel::add_hess(ConstVec z, ConstVec v, ConstVec theta, double weight,
                                Matrix& out, Index offset) const {
  if (impl_->bilinear || weight == 0.0) return;
  const Index s = param_dim();
  out.block(offset, offset, s, s) += weight * impl_->general.hess(z, v, theta);
}

AssociationModel AssociationModel::dual() const {
  const Impl& m = *impl_;
  if (m.bilinear) {
    ModelKind kind = m.kind == ModelKind::restricted ? ModelKind::restricted : ModelKind::log_bilinear;
    return make_bilinear_impl(kind, m.b, m.a, m.dim_y, m.dim_x);
  }
  GeneralModelSpec spec;
  spec.param_dim = m.param_dim;
  spec.dim_x = m.dim_y;
  spec.dim_y = m.dim_x;
  spec.name = m.general.name + "^dual";
  const GeneralModelSpec base = m.general;
  spec.g = [base](ConstVec z, ConstVec v, ConstVec t) { return base.g(v, z, t); };
  spec.grad = [base](ConstVec z, ConstVec v, ConstVec t) { return base.grad(v, z, t); };
  spec.hess = [base](ConstVec z, ConstVec v, ConstVec t) { return base.hess(v, z, t); };
  if (base.third) {
    spec.third = [base](ConstVec z, ConstVec v, ConstVec t) { return base.third(v, z, t); };
  }
  if (base.envelope_x) {
    spec.envelope_x = base.envelope_y;
    spec.envelope_y = base.envelope_x;
  }
  return general(std::move(spec));
}

Vector AssociationModel::theta_to_dual(ConstVec theta) const {
  if (theta.size() != param_dim()) throw ArgumentError("theta_to_dual: wrong length");
  if (!impl_->bilinear) return theta;
  const Index rows = impl_->rows();
  const Index cols = impl_->cols();
  Vector out(theta.size());
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out[c * rows + r] = theta[r * cols + c];
  return out;
}

Vector AssociationModel::theta_from_dual(ConstVec dual_theta) const {
  if (dual_theta.size() != param_dim()) throw ArgumentError("theta_from_dual: wrong length");
  if (!impl_->bilinear) return dual_theta;
  const Index rows = impl_->rows();
  const Index cols = impl_->cols();
  Vector out(dual_theta.size());
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out[r * cols + c] = dual_theta[c * rows + r];
  return out;
}

std::string AssociationModel::param_name(Index r) const {
  std::ostringstream os;
  if (impl_->bilinear) {
    os << "theta[" << r / impl_->cols() << "," << r % impl_->cols() << "]";
  } else {
    os << "theta[" << r << "]";
  }
  return os.str();
}

double eval_psi(const AssociationModel& model, ConstVec z, ConstVec v, ConstVec theta) {
  return model.psi(z, v, theta);
}

AssociationModel make_log_bilinear(Index k_x, Index k_y) {
  if (k_x < 1 || k_y < 1) throw ArgumentError("make_log_bilinear: dimensions must be >= 1");
  return make_bilinear_impl(ModelKind::log_bilinear, Matrix::Identity(k_x, k_x),
                            Matrix::Identity(k_y, k_y), k_x, k_y);
}

AssociationModel make_glm_canonical(Index k_x) {
  if (k_x < 1) throw ArgumentError("make_glm_canonical: k_x must be >= 1");
  return make_bilinear_impl(ModelKind::glm_canonical, Matrix::Identity(k_x, k_x),
                            Matrix::Identity(1, 1), k_x, 1);
}

Vector glm_theta_from_beta(ConstVec beta, double dispersion) {
  if (!(dispersion > 0.0)) throw ArgumentError("glm_theta_from_beta: dispersion must be > 0");
  return beta / dispersion;
}

AssociationModel make_multinomial_logit(Index k_x, Index n_classes) {
  if (k_x < 1) throw ArgumentError("make_multinomial_logit: k_x must be >= 1");
  if (n_classes < 2) throw ArgumentError("make_multinomial_logit: need at least 2 classes");
  const Index k = n_classes - 1;
  return make_bilinear_impl(ModelKind::multinomial_logit, Matrix::Identity(k_x, k_x),
                            Matrix::Identity(k, k), k_x, k);
}

Vector multinomial_class_features(Index n_classes, Index k) {
  if (n_classes < 2 || k < 0 || k >= n_classes) {
    throw ArgumentError("multinomial_class_features: class index out of range");
  }
  Vector v = Vector::Zero(n_classes - 1);
  if (k > 0) v[k - 1] = 1.0;
  return v;
}

RegressionAssociation make_mv_linear(const Matrix& beta, const Matrix& sigma) {
  if (beta.rows() < 1 || beta.cols() < 1) throw ArgumentError("make_mv_linear: empty beta");
  if (sigma.rows() != sigma.cols() || sigma.rows() != beta.cols()) {
    throw ArgumentError("make_mv_linear: sigma must be K x K with K = beta.cols()");
  }
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (!sigma.isApprox(sigma.transpose(), 1e-12) &&
      (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ArgumentError("make_mv_linear: sigma is not symmetric");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw ArgumentError("make_mv_linear: sigma is not positive definite");
  }
  // theta * sigma = beta  <=>  sigma * theta^T = beta^T (sigma symmetric)
  const Matrix theta = llt.solve(beta.transpose()).transpose();
  RegressionAssociation out{make_bilinear_impl(ModelKind::mv_linear, Matrix::Identity(beta.rows(), beta.rows()),
                                               Matrix::Identity(beta.cols(), beta.cols()),
                                               beta.rows(), beta.cols()),
                            Vector(theta.rows() * theta.cols())};
  for (Index r = 0; r < theta.rows(); ++r)
    for (Index c = 0; c < theta.cols(); ++c) out.theta[r * theta.cols() + c] = theta(r, c);
  return out;
}

AssociationModel restrict_bilinear(const AssociationModel& base, const Matrix& a, const Matrix& b) {
  if (!base.is_log_bilinear()) throw ArgumentError("restrict_bilinear: base must be log-bilinear");
  if (a.cols() != base.theta_rows() || b.cols() != base.theta_cols() || a.rows() < 1 ||
      b.rows() < 1) {
    std::ostringstream os;
    os << "restrict_bilinear: A must have " << base.theta_rows() << " columns and B "
       << base.theta_cols() << " columns";
    throw ArgumentError(os.str());
  }
  return make_bilinear_impl(ModelKind::restricted, a * base.feature_map_x(),
                            b * base.feature_map_y(), base.dim_x(), base.dim_y());
}

Vector expand_restricted_theta(const Matrix& a, const Matrix& b, ConstVec theta_star) {
  if (theta_star.size() != a.rows() * b.rows()) {
    throw ArgumentError("expand_restricted_theta: theta* has wrong length");
  }
  const Eigen::Map<const RowMajor> ts(theta_star.data(), a.rows(), b.rows());
  const RowMajor full = a.transpose() * ts * b;
  return Eigen::Map<const Vector>(full.data(), full.size());
}

}  // namespace assoc
