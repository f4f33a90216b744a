#include "assoc/estimator.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "assoc/errors.hpp"
#include "assoc/kernels.hpp"
#include "assoc/linalg.hpp"

namespace assoc {

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::info:
      return "info";
    case Severity::warning:
      return "warning";
    case Severity::error:
      return "error";
  }
  return "unknown";
}

namespace {

struct Objective {
  double value = 0.0;
  Vector grad;
  Matrix info;  // negative Hessian
};

using ObjectiveFn = std::function<Objective(const Vector& x, bool derivatives)>;

struct NewtonResult {
  Vector x;
  Objective at_x;
  int iterations = 0;
  std::vector<double> trace;
};

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Maximizes f by Newton steps with step halving. The path is monotone: a
// step is accepted only if it does not decrease f.
NewtonResult newton_maximize(const ObjectiveFn& f, Vector x, const FitOptions& opt,
                             const char* what, double sample_size) {
  NewtonResult res;
  Objective cur = f(x, true);
  res.trace.push_back(cur.value);
  // Divergent paths (separation) creep outward roughly linearly with the
  // likelihood flattening; treat a long run of growth past this radius as
  // evidence that no maximizer exists.
  constexpr double kRayRadius = 20.0;
  constexpr double kFlatInfo = 1e-9;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    const double gnorm = max_abs(cur.grad);
    if (max_abs(x) > opt.divergence_bound) {
      std::ostringstream os;
      os << what << ": parameter norm exceeded " << opt.divergence_bound
         << " with the likelihood still increasing; the maximum likelihood estimate does not "
            "exist (separated data)";
      throw DivergenceError(os.str());
    }
    const double cond = spd_condition(cur.info);
    const bool newton_ok = cond <= kConditionLimit;
    Vector dir;
    if (newton_ok) {
      dir = cur.info.llt().solve(cur.grad);
    } else {
      dir = cur.grad;
    }

    if (gnorm <= opt.grad_tol) {
      if (!newton_ok) {
        std::ostringstream os;
        os << what << ": information matrix is singular at a stationary point (condition "
           << cond << ", |lambda|_inf = " << max_abs(x) << ")";
        if (max_abs(x) > kRayRadius) {
          os << "; the estimate does not exist (separated data)";
          throw DivergenceError(os.str());
        }
        os << "; parameters are not identifiable";
        throw IdentifiabilityError(os.str());
      }
      if (max_abs(dir) <= opt.step_tol) {
        // A stationary point whose curvature has collapsed relative to the
        // sample size is the flat tail of a separated likelihood, or a flat
        // ridge of an unidentified one.
        const double floor = kFlatInfo * std::max(1.0, sample_size);
        const double min_eig = cur.info.size() == 0
                                   ? floor
                                   : Eigen::SelfAdjointEigenSolver<Matrix>(cur.info, Eigen::EigenvaluesOnly)
                                         .eigenvalues()
                                         .minCoeff();
        if (min_eig < floor) {
          std::ostringstream os;
          os << what << ": information collapsed at the stationary point (smallest eigenvalue "
             << min_eig << ", |lambda|_inf = " << max_abs(x) << ")";
          if (max_abs(x) > kRayRadius) {
            os << "; the estimate does not exist (separated data)";
            throw DivergenceError(os.str());
          }
          os << "; parameters are not identifiable";
          throw IdentifiabilityError(os.str());
        }
        res.x = std::move(x);
        res.at_x = std::move(cur);
        res.iterations = it;
        return res;
      }
    }

    double t = 1.0;
    bool accepted = false;
    Vector trial;
    double trial_value = 0.0;
    // Inside the roundoff band of the log-likelihood the value test is
    // noise; a Newton step whose predicted gain is that small is taken as is.
    const double noise = 1e-12 * std::max(1.0, std::abs(cur.value));
    const bool tiny_gain = newton_ok && 0.5 * cur.grad.dot(dir) <= noise;
    for (int h = 0; h <= opt.max_step_halvings; ++h, t *= 0.5) {
      trial = x + t * dir;
      try {
        trial_value = f(trial, false).value;
      } catch (const EvaluationError&) {
        continue;
      }
      if (std::isfinite(trial_value) && (trial_value >= cur.value || (tiny_gain && h == 0))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (gnorm <= opt.grad_tol && newton_ok) {
        // Roundoff-limited: no representable ascent left at a stationary point.
        res.x = std::move(x);
        res.at_x = std::move(cur);
        res.iterations = it;
        return res;
      }
      std::ostringstream os;
      os << what << ": step halving exhausted at iteration " << it << " (|score|_inf = " << gnorm
         << ")";
      if (max_abs(x) > kRayRadius) {
        os << "; parameters are drifting to infinity, the estimate does not exist";
        throw DivergenceError(os.str());
      }
      throw ConvergenceError(os.str());
    }
    x = std::move(trial);
    cur = f(x, true);
    res.trace.push_back(cur.value);
  }

  const double gnorm = max_abs(cur.grad);
  std::ostringstream os;
  os << what << ": no convergence in " << opt.max_iter << " iterations (|score|_inf = " << gnorm
     << ", |lambda|_inf = " << max_abs(x) << ")";
  const std::size_t m = res.trace.size();
  const bool rising = m > 10 && res.trace[m - 1] >= res.trace[m - 11];
  if (max_abs(x) > kRayRadius && rising) {
    os << "; the likelihood keeps increasing along a ray, the estimate does not exist "
          "(separated data)";
    throw DivergenceError(os.str());
  }
  throw ConvergenceError(os.str());
}

Matrix centered_columns(const Matrix& cols, const Vector& weights) {
  const Vector mean = cols * weights / weights.sum();
  return cols.colwise() - mean;
}

// Pooled distinct covariate vectors across strata, with total weights.
void pooled_covariates(const ConditionalDataset& data, Matrix& z, Vector& w) {
  Index m = 0;
  for (const auto& s : data.strata()) m += s.distinct();
  z.resize(data.dim_x(), m);
  w.resize(m);
  Index c = 0;
  for (const auto& s : data.strata()) {
    z.middleCols(c, s.distinct()) = s.z;
    w.segment(c, s.distinct()) = s.weight;
    c += s.distinct();
  }
}

Vector default_init_gamma(const ConditionalDataset& data) {
  const Vector n = data.counts();
  Vector g(data.num_nuisance());
  for (Index k = 1; k < n.size(); ++k) g[k - 1] = std::log(n[k] / n[0]);
  return g;
}

}  // namespace

void ContingencyTable::validate() const {
  if (counts.rows() < 2 || counts.cols() < 2) throw DataError("table must be at least 2 x 2");
  if (!counts.allFinite() || counts.minCoeff() < 0.0) {
    throw DataError("table counts must be finite and nonnegative");
  }
  if (z_support.cols() != counts.rows() || v_support.cols() != counts.cols()) {
    throw DataError("table supports do not match the table shape");
  }
  if (!z_support.col(0).isZero(0.0) || !v_support.col(0).isZero(0.0)) {
    throw DataError("reference row/column features must be zero vectors");
  }
}

ConditionalDataset strata_by_column(const ContingencyTable& table) {
  table.validate();
  std::vector<Stratum> strata;
  for (Index k = 0; k < table.counts.cols(); ++k) {
    strata.push_back(Stratum{table.z_support, table.counts.col(k)});
  }
  return ConditionalDataset(table.v_support, std::move(strata));
}

ConditionalDataset strata_by_row(const ContingencyTable& table) {
  table.validate();
  std::vector<Stratum> strata;
  for (Index j = 0; j < table.counts.rows(); ++j) {
    strata.push_back(Stratum{table.v_support, table.counts.row(j).transpose()});
  }
  return ConditionalDataset(table.z_support, std::move(strata));
}

std::vector<Diagnostic> check_conditions(const AssociationModel& model,
                                         const ConditionalDataset& data,
                                         std::optional<Vector> theta) {
  std::vector<Diagnostic> out;
  if (model.dim_x() != data.dim_x() || model.dim_y() != data.dim_y()) {
    throw ArgumentError("check_conditions: model and data dimensions differ");
  }
  Matrix zpool;
  Vector wpool;
  pooled_covariates(data, zpool, wpool);
  const double n = wpool.sum();
  const Index levels = data.num_levels();

  if (model.is_log_bilinear()) {
    const Matrix& a = model.feature_map_x();
    const Matrix& b = model.feature_map_y();
    const Matrix vstar = b * data.v_levels().rightCols(levels - 1);
    const Index rank_v = numerical_rank(vstar);
    if (rank_v < model.theta_cols()) {
      std::ostringstream os;
      os << "outcome features (v_1..v_K) have rank " << rank_v << " < theta columns = "
         << model.theta_cols() << "; theta is not identifiable";
      out.push_back({"outcome_rank", Severity::error, os.str()});
    }
    const Matrix zstar = a * zpool;
    const Index rank_z = numerical_rank(centered_columns(zstar, wpool));
    if (rank_z < model.theta_rows()) {
      std::ostringstream os;
      os << "centered covariate design has rank " << rank_z
         << " < theta rows = " << model.theta_rows() << " (covariates lie on a hyperplane)";
      out.push_back({"covariate_rank", Severity::error, os.str()});
    }
    const Eigen::ArrayXd norms = zstar.colwise().norm().transpose().array();
    const double m2 = (wpool.array() * norms.square()).sum() / n;
    const double m3 = (wpool.array() * norms.cube()).sum() / n;
    std::ostringstream os2;
    os2 << "sample E||h_X(X)||^2 = " << m2;
    out.push_back({"covariate_moment2", Severity::info, os2.str()});
    std::ostringstream os3;
    os3 << "sample E||h_X(X)||^3 = " << m3;
    out.push_back({"covariate_moment3", Severity::info, os3.str()});
  } else {
    // no nonzero s makes D_theta psi(z, v_k) s constant in z
    // for every k.
    const Vector th = theta.value_or(Vector::Zero(model.param_dim()));
    const Index s = model.param_dim();
    Matrix stacked((levels - 1) * zpool.cols(), s);
    Vector g(s);
    for (Index k = 1; k < levels; ++k) {
      Matrix rows(zpool.cols(), s);
      for (Index i = 0; i < zpool.cols(); ++i) {
        model.grad_into(zpool.col(i), data.v_levels().col(k), th, g.data());
        rows.row(i) = g.transpose();
      }
      const Eigen::RowVectorXd mean = (wpool.transpose() * rows) / n;
      stacked.middleRows((k - 1) * zpool.cols(), zpool.cols()) = rows.rowwise() - mean;
    }
    const Index rank = numerical_rank(stacked);
    if (rank < s) {
      std::ostringstream os;
      os << "centered theta-gradients have rank " << rank
         << " < S = " << s;
      out.push_back({"gradient_rank", Severity::error, os.str()});
    }
  }
  return out;
}

FitReport fit(const AssociationModel& model, const ConditionalDataset& data,
              const FitOptions& options) {
  const Index s = model.param_dim();
  const Index k = data.num_nuisance();
  Lambda init{options.init_theta.value_or(Vector::Zero(s)),
              options.init_gamma.value_or(default_init_gamma(data))};
  check_compatible(model, init, data);

  FitReport report;
  report.diagnostics = check_conditions(model, data, init.theta);
  for (const auto& d : report.diagnostics) {
    if (d.severity == Severity::error) throw IdentifiabilityError(d.message);
  }

  const ObjectiveFn objective = [&](const Vector& x, bool derivatives) {
    const Lambda lam = Lambda::from_stacked(x, s);
    LikelihoodTerms t = evaluate(model, lam, data, derivatives ? Need::info : Need::value);
    return Objective{t.loglik, std::move(t.score), std::move(t.info)};
  };
  NewtonResult res = newton_maximize(objective, init.stacked(), options, "fit", data.total());

  report.lambda_hat = Lambda::from_stacked(res.x, s);
  report.converged = true;
  report.iterations = res.iterations;
  report.final_grad_norm = res.at_x.grad.cwiseAbs().maxCoeff();
  report.loglik_at_hat = res.at_x.value;
  report.observed_info_at_hat = std::move(res.at_x.info);
  report.loglik_trace = std::move(res.trace);
  report.n_vec = data.counts();
  (void)k;

  if (model.has_envelopes()) {
    const double tnorm = report.lambda_hat.theta.norm();
    Index violations = 0;
    for (Index l = 0; l < data.num_levels(); ++l) {
      const Stratum& st = data.stratum(l);
      for (Index i = 0; i < st.distinct(); ++i) {
        for (Index m = 0; m < data.num_levels(); ++m) {
          const double psi = model.psi_unchecked(st.z.col(i), data.v_levels().col(m),
                                                 report.lambda_hat.theta);
          const double bound = model.envelope(st.z.col(i), data.v_levels().col(m)) * tnorm;
          if (std::abs(psi) > bound * (1.0 + 1e-12) + 1e-300) ++violations;
        }
      }
    }
    if (violations > 0) {
      std::ostringstream os;
      os << violations << " (z, v) pairs violate the envelope bound |psi| <= "
         << "(env_x + env_y) ||theta||";
      report.diagnostics.push_back({"envelope", Severity::warning, os.str()});
    }
  }
  return report;
}

FitReport fit_reverse(const AssociationModel& model, const ContingencyTable& table,
                      const FitOptions& options) {
  const AssociationModel dual = model.dual();
  const ConditionalDataset data = strata_by_row(table);
  FitOptions dual_opt = options;
  if (options.init_theta) dual_opt.init_theta = model.theta_to_dual(*options.init_theta);
  if (options.init_gamma && options.init_gamma->size() != data.num_nuisance()) {
    dual_opt.init_gamma.reset();
  }
  FitReport rep = fit(dual, data, dual_opt);

  const Index s = model.param_dim();
  // orig[i] = forward index of dual parameter i
  Vector idx(s);
  std::iota(idx.data(), idx.data() + s, 0.0);
  const Vector orig = model.theta_to_dual(idx);
  Matrix& info = rep.observed_info_at_hat;
  Matrix mapped = info;
  for (Index i = 0; i < info.rows(); ++i) {
    const Index oi = i < s ? static_cast<Index>(orig[i]) : i;
    for (Index j = 0; j < info.cols(); ++j) {
      const Index oj = j < s ? static_cast<Index>(orig[j]) : j;
      mapped(oi, oj) = info(i, j);
    }
  }
  info = std::move(mapped);
  rep.lambda_hat.theta = model.theta_from_dual(rep.lambda_hat.theta);
  rep.conditioning = 'x';
  return rep;
}

LogLinearFit fit_loglinear(const AssociationModel& model, const ContingencyTable& table,
                           const LogLinearOptions& options) {
  table.validate();
  const Matrix& r = table.counts;
  const Index rows = r.rows();
  const Index cols = r.cols();
  const Index nb = rows - 1;
  const Index ng = cols - 1;
  const Index s = model.param_dim();
  if (table.z_support.rows() != model.dim_x() || table.v_support.rows() != model.dim_y()) {
    throw ArgumentError("fit_loglinear: table supports do not match the model");
  }
  const Vector row_tot = r.rowwise().sum();
  const Vector col_tot = r.colwise().sum().transpose();
  if (!(row_tot.minCoeff() > 0.0) || !(col_tot.minCoeff() > 0.0)) {
    throw IdentifiabilityError("fit_loglinear: a row or column margin is zero");
  }
  const double n = r.sum();
  const bool frozen = options.freeze_theta;
  const Vector theta_fixed = options.frozen_theta.value_or(Vector::Zero(s));
  if (theta_fixed.size() != s) throw ArgumentError("fit_loglinear: frozen theta has wrong length");
  if (!frozen) {
    const auto diags = check_conditions(model, strata_by_column(table));
    for (const auto& d : diags) {
      if (d.severity == Severity::error) throw IdentifiabilityError(d.message);
    }
  }
  const Index free_theta = frozen ? 0 : s;
  const Index dim = nb + ng + free_theta;

  // Per-cell theta-gradients are constant for log-bilinear models; cache them.
  const Index cells = rows * cols;
  const auto theta_of = [&](const Vector& x) {
    return frozen ? theta_fixed : Vector(x.tail(s));
  };

  const ObjectiveFn objective = [&](const Vector& x, bool derivatives) {
    const Vector theta = theta_of(x);
    Vector eta(cells);
    for (Index k = 0; k < cols; ++k) {
      for (Index j = 0; j < rows; ++j) {
        double e = 0.0;
        if (j > 0) e += x[j - 1];
        if (k > 0) e += x[nb + k - 1];
        if (j > 0 && k > 0) {
          e += model.psi_unchecked(table.z_support.col(j), table.v_support.col(k), theta);
        }
        if (!std::isfinite(e)) throw EvaluationError("fit_loglinear: non-finite cell predictor", k);
        eta[k * rows + j] = e;
      }
    }
    Vector p(cells);
    const double lse = kernels::softmax({eta.data(), static_cast<std::size_t>(cells)},
                                        {p.data(), static_cast<std::size_t>(cells)});
    Objective obj;
    obj.value = 0.0;
    for (Index k = 0; k < cols; ++k)
      for (Index j = 0; j < rows; ++j)
        if (r(j, k) > 0.0) obj.value += r(j, k) * (eta[k * rows + j] - lse);
    if (!derivatives) return obj;

    // d eta_jk / dx for every cell, then mean under p.
    Matrix d = Matrix::Zero(dim, cells);
    Vector g(s);
    for (Index k = 0; k < cols; ++k) {
      for (Index j = 0; j < rows; ++j) {
        const Index c = k * rows + j;
        if (j > 0) d(j - 1, c) = 1.0;
        if (k > 0) d(nb + k - 1, c) = 1.0;
        if (!frozen) {
          model.grad_into(table.z_support.col(j), table.v_support.col(k), theta, g.data());
          d.col(c).tail(s) = g;
        }
      }
    }
    const Vector dbar = d * p;
    obj.grad = Vector::Zero(dim);
    obj.info = Matrix::Zero(dim, dim);
    Vector centered(dim);
    const auto& kt = kernels::active();
    for (Index k = 0; k < cols; ++k) {
      for (Index j = 0; j < rows; ++j) {
        const Index c = k * rows + j;
        const double resid = r(j, k) - n * p[c];
        obj.grad.noalias() += resid * d.col(c);
        centered = d.col(c) - dbar;
        kt.syr(n * p[c], centered.data(), obj.info.data(), static_cast<std::size_t>(dim),
               static_cast<std::size_t>(dim));
        if (!frozen && !model.hess_vanishes() && j > 0 && k > 0) {
          model.add_hess(table.z_support.col(j), table.v_support.col(k), theta, -resid, obj.info,
                         nb + ng);
        }
      }
    }
    obj.info = 0.5 * (obj.info + obj.info.transpose()).eval();
    return obj;
  };

  // Start at the independence fit (exact when theta = 0).
  Vector x0 = Vector::Zero(dim);
  for (Index j = 1; j < rows; ++j) x0[j - 1] = std::log(row_tot[j] / row_tot[0]);
  for (Index k = 1; k < cols; ++k) x0[nb + k - 1] = std::log(col_tot[k] / col_tot[0]);
  if (!frozen && options.solver.init_theta) x0.tail(s) = *options.solver.init_theta;

  NewtonResult res = newton_maximize(objective, x0, options.solver, "fit_loglinear", r.sum());

  LogLinearFit out;
  out.beta = res.x.head(nb);
  out.gamma = res.x.segment(nb, ng);
  out.theta = theta_of(res.x);
  out.iterations = res.iterations;
  out.converged = true;
  out.loglik = res.at_x.value;
  Matrix eta(rows, cols);
  for (Index k = 0; k < cols; ++k) {
    for (Index j = 0; j < rows; ++j) {
      double e = 0.0;
      if (j > 0) e += out.beta[j - 1];
      if (k > 0) e += out.gamma[k - 1];
      if (j > 0 && k > 0) {
        e += model.psi_unchecked(table.z_support.col(j), table.v_support.col(k), out.theta);
      }
      eta(j, k) = e;
    }
  }
  out.alpha = -kernels::log_sum_exp({eta.data(), static_cast<std::size_t>(eta.size())});
  out.fitted = (eta.array() + out.alpha).exp();
  if (!frozen) {
    const Matrix inv = inverse_spd(res.at_x.info, "fit_loglinear information");
    out.cov_theta = inv.bottomRightCorner(s, s);
  }
  return out;
}

}  // namespace assoc
