#include "assoc/likelihood.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "predictor.hpp"

namespace assoc {

Vector Lambda::stacked() const {
  Vector out(size());
  out << theta, gamma_star;
  return out;
}

Lambda Lambda::from_stacked(const Vector& stacked, Index theta_dim) {
  if (theta_dim < 0 || theta_dim > stacked.size()) {
    throw ArgumentError("Lambda::from_stacked: theta_dim out of range");
  }
  return Lambda{stacked.head(theta_dim), stacked.tail(stacked.size() - theta_dim)};
}

namespace {

struct LexLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }
};

Stratum canonicalize(const Stratum& s, Index dim_x, Index k) {
  if (s.z.rows() != dim_x) {
    std::ostringstream os;
    os << "stratum " << k << ": covariate dimension " << s.z.rows() << " != " << dim_x;
    throw DataError(os.str());
  }
  if (s.weight.size() != s.z.cols()) {
    std::ostringstream os;
    os << "stratum " << k << ": " << s.weight.size() << " weights for " << s.z.cols()
       << " covariate vectors";
    throw DataError(os.str());
  }
  std::map<std::vector<double>, double, LexLess> merged;
  for (Index i = 0; i < s.z.cols(); ++i) {
    const double w = s.weight[i];
    if (!std::isfinite(w) || w < 0.0) {
      std::ostringstream os;
      os << "stratum " << k << ": weight " << w << " is not a nonnegative count";
      throw DataError(os.str());
    }
    if (!s.z.col(i).allFinite()) {
      std::ostringstream os;
      os << "stratum " << k << ": non-finite covariate value";
      throw DataError(os.str());
    }
    if (w == 0.0) continue;
    std::vector<double> key(s.z.col(i).data(), s.z.col(i).data() + dim_x);
    merged[std::move(key)] += w;
  }
  Stratum out{Matrix(dim_x, static_cast<Index>(merged.size())),
              Vector(static_cast<Index>(merged.size()))};
  Index c = 0;
  for (const auto& [key, w] : merged) {
    out.z.col(c) = Eigen::Map<const Vector>(key.data(), dim_x);
    out.weight[c] = w;
    ++c;
  }
  return out;
}

}  // namespace

ConditionalDataset::ConditionalDataset(Matrix v_levels, std::vector<Stratum> strata)
    : v_levels_(std::move(v_levels)) {
  if (v_levels_.cols() < 2) throw DataError("need at least two outcome strata (K+1 >= 2)");
  if (static_cast<Index>(strata.size()) != v_levels_.cols()) {
    throw DataError("number of strata does not match number of outcome levels");
  }
  if (!v_levels_.col(0).isZero(0.0)) {
    throw DataError("reference stratum 0 must have the zero outcome feature vector");
  }
  if (!v_levels_.allFinite()) throw DataError("non-finite outcome feature value");
  dim_x_ = strata.front().z.rows();
  if (dim_x_ < 1) throw DataError("covariate dimension must be >= 1");
  strata_.reserve(strata.size());
  for (std::size_t k = 0; k < strata.size(); ++k) {
    strata_.push_back(canonicalize(strata[k], dim_x_, static_cast<Index>(k)));
    if (!(strata_.back().count() >= 1.0)) {
      std::ostringstream os;
      os << "stratum " << k << " is empty; every stratum needs n_k >= 1";
      throw DataError(os.str());
    }
  }
}

ConditionalDataset ConditionalDataset::from_observations(
    Matrix v_levels, const std::vector<std::vector<Vector>>& observations) {
  std::vector<Stratum> strata;
  strata.reserve(observations.size());
  Index dim_x = 0;
  for (const auto& obs : observations) {
    if (!obs.empty()) {
      dim_x = obs.front().size();
      break;
    }
  }
  for (const auto& obs : observations) {
    Stratum s{Matrix(dim_x, static_cast<Index>(obs.size())),
              Vector::Ones(static_cast<Index>(obs.size()))};
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (obs[i].size() != dim_x) throw DataError("inconsistent covariate dimension");
      s.z.col(static_cast<Index>(i)) = obs[i];
    }
    strata.push_back(std::move(s));
  }
  return ConditionalDataset(std::move(v_levels), std::move(strata));
}

Vector ConditionalDataset::counts() const {
  Vector n(num_levels());
  for (Index k = 0; k < num_levels(); ++k) n[k] = strata_[static_cast<std::size_t>(k)].count();
  return n;
}

double ConditionalDataset::total() const { return counts().sum(); }

void check_compatible(const AssociationModel& model, const Lambda& lambda,
                      const ConditionalDataset& data) {
  std::ostringstream os;
  if (model.dim_x() != data.dim_x()) {
    os << "model covariate dimension " << model.dim_x() << " != data " << data.dim_x();
  } else if (model.dim_y() != data.dim_y()) {
    os << "model outcome dimension " << model.dim_y() << " != data " << data.dim_y();
  } else if (lambda.theta.size() != model.param_dim()) {
    os << "theta has length " << lambda.theta.size() << ", model needs " << model.param_dim();
  } else if (lambda.gamma_star.size() != data.num_nuisance()) {
    os << "gamma* has length " << lambda.gamma_star.size() << ", data has K = "
       << data.num_nuisance();
  } else {
    return;
  }
  throw ArgumentError(os.str());
}

Vector cond_prob(const AssociationModel& model, const Lambda& lambda, const Matrix& v_levels,
                 ConstVec z) {
  if (z.size() != model.dim_x() || v_levels.rows() != model.dim_y() ||
      lambda.theta.size() != model.param_dim() || lambda.gamma_star.size() != v_levels.cols() - 1) {
    throw ArgumentError("cond_prob: dimension mismatch");
  }
  detail::Predictor pred(model, lambda, v_levels);
  pred.predict(z);
  return pred.prob();
}

LikelihoodTerms evaluate(const AssociationModel& model, const Lambda& lambda,
                         const ConditionalDataset& data, Need need) {
  check_compatible(model, lambda, data);
  detail::Predictor pred(model, lambda, data.v_levels());
  LikelihoodTerms out;
  const bool want_score = need != Need::value;
  const bool want_info = need == Need::info;
  if (want_score) out.score = Vector::Zero(pred.dim());
  if (want_info) out.info = Matrix::Zero(pred.dim(), pred.dim());

  for (Index k = 0; k < data.num_levels(); ++k) {
    const Stratum& s = data.stratum(k);
    for (Index i = 0; i < s.distinct(); ++i) {
      const auto z = s.z.col(i);
      const double w = s.weight[i];
      pred.predict(z);
      out.loglik += w * pred.log_prob(k);
      if (!want_score) continue;
      pred.gradients(z);
      pred.score_into(k, w, out.score);
      if (want_info) pred.info_into(z, k, w, out.info);
    }
  }
  if (want_info) {
    // syr updates both triangles; symmetrize away rounding asymmetry from
    // user-supplied Hessians.
    out.info = 0.5 * (out.info + out.info.transpose()).eval();
  }
  return out;
}

double loglik(const AssociationModel& model, const Lambda& lambda, const ConditionalDataset& data) {
  return evaluate(model, lambda, data, Need::value).loglik;
}

Vector score(const AssociationModel& model, const Lambda& lambda, const ConditionalDataset& data) {
  return evaluate(model, lambda, data, Need::score).score;
}

Matrix observed_info(const AssociationModel& model, const Lambda& lambda,
                     const ConditionalDataset& data) {
  return evaluate(model, lambda, data, Need::info).info;
}

}  // namespace assoc
