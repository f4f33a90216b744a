#include "assoc/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "assoc/errors.hpp"

namespace assoc {

double spd_condition(const Matrix& a) {
  if (a.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Matrix inverse_spd(const Matrix& a, const char* what, double cond_limit) {
  if (a.rows() != a.cols()) throw ArgumentError(std::string(what) + ": matrix is not square");
  if (a.rows() == 0) return a;
  const double cond = spd_condition(a);
  if (!(cond <= cond_limit)) {
    std::ostringstream os;
    os << what << ": matrix is singular or ill-conditioned (condition number " << cond
       << " > " << cond_limit << ")";
    throw IdentifiabilityError(os.str());
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw IdentifiabilityError(std::string(what) + ": matrix is not positive definite");
  }
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

Matrix inverse_sqrt_spd(const Matrix& a, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0)) {
    throw IdentifiabilityError(std::string(what) + ": matrix is not positive definite");
  }
  return es.operatorInverseSqrt();
}

Index numerical_rank(const Matrix& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(rel_tol);
  return qr.rank();
}

double norm_inf(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace assoc
