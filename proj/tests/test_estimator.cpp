#include <doctest.h>

#include <cmath>
#include <random>

#include "assoc/distfactory.hpp"
#include "assoc/errors.hpp"
#include "assoc/estimator.hpp"
#include "assoc/inference.hpp"

using namespace assoc;

namespace {

ContingencyTable table(std::initializer_list<std::initializer_list<double>> rows) {
  ContingencyTable t;
  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(rows.begin()->size());
  t.counts.resize(r, c);
  Index j = 0;
  for (const auto& row : rows) {
    Index k = 0;
    for (double x : row) t.counts(j, k++) = x;
    ++j;
  }
  t.z_support = indicator_support(r);
  t.v_support = indicator_support(c);
  return t;
}

// Prospective logistic regression of y on (1, x) by IRLS.
Vector logistic_irls(const Matrix& x, const Vector& y) {
  Matrix d(x.rows(), x.cols() + 1);
  d << Vector::Ones(x.rows()), x;
  Vector b = Vector::Zero(d.cols());
  for (int it = 0; it < 100; ++it) {
    const Vector eta = d * b;
    const Vector p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const Vector w = (p.array() * (1 - p.array())).matrix();
    const Matrix h = d.transpose() * w.asDiagonal() * d;
    const Vector step = h.ldlt().solve(d.transpose() * (y - p));
    b += step;
    if (step.cwiseAbs().maxCoeff() < 1e-14) break;
  }
  return b;
}

}  // namespace

TEST_CASE("closed-form 2x2 fit") {
  const ContingencyTable t = table({{10, 20}, {30, 40}});
  const FitReport r = fit(make_log_bilinear(1, 1), strata_by_column(t));
  CHECK(r.converged);
  CHECK(r.lambda_hat.theta[0] == doctest::Approx(std::log(2.0 / 3)).epsilon(1e-10));
  CHECK(r.lambda_hat.gamma_star[0] == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  const Matrix cov = r.observed_info_at_hat.inverse();
  CHECK(cov(0, 0) == doctest::Approx(1.0 / 10 + 1.0 / 20 + 1.0 / 30 + 1.0 / 40).epsilon(1e-9));
  CHECK(cov(1, 1) == doctest::Approx(1.0 / 10 + 1.0 / 20).epsilon(1e-9));
  CHECK(r.final_grad_norm <= 1e-8);
  CHECK(r.n_vec == (Vector(2) << 40, 60).finished());
  for (std::size_t i = 1; i < r.loglik_trace.size(); ++i) CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1]);
  CHECK(r.loglik_at_hat == doctest::Approx(-66.898992).epsilon(1e-8));
}

TEST_CASE("two strata reduce to prospective logistic regression") {
  std::mt19937_64 g(31);
  std::normal_distribution<double> nd;
  const Index n = 300;
  Matrix x(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = nd(g);
    x(i, 1) = nd(g);
    const double eta = -0.3 + 0.8 * x(i, 0) - 0.5 * x(i, 1);
    y[i] = std::uniform_real_distribution<double>(0, 1)(g) < 1 / (1 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  Matrix v(1, 2);
  v << 0, 1;
  std::vector<std::vector<Vector>> obs(2);
  for (Index i = 0; i < n; ++i) obs[y[i] > 0 ? 1 : 0].push_back(x.row(i).transpose());
  const ConditionalDataset data = ConditionalDataset::from_observations(v, obs);
  const FitReport r = fit(make_glm_canonical(2), data);
  const Vector b = logistic_irls(x, y);
  CHECK(r.lambda_hat.gamma_star[0] == doctest::Approx(b[0]).epsilon(1e-8));
  CHECK(r.lambda_hat.theta[0] == doctest::Approx(b[1]).epsilon(1e-8));
  CHECK(r.lambda_hat.theta[1] == doctest::Approx(b[2]).epsilon(1e-8));
}

TEST_CASE("forward, reverse and log-linear fits agree") {
  std::mt19937_64 g(32);
  std::uniform_int_distribution<int> cnt(3, 80);
  for (int rep = 0; rep < 10; ++rep) {
    ContingencyTable t = table({{1, 1, 1}, {1, 1, 1}, {1, 1, 1, }});
    if (rep % 2) t = table({{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}});
    for (Index j = 0; j < t.counts.rows(); ++j)
      for (Index k = 0; k < t.counts.cols(); ++k) t.counts(j, k) = cnt(g);
    const AssociationModel m = make_log_bilinear(t.counts.rows() - 1, t.counts.cols() - 1);
    const FitReport f = fit(m, strata_by_column(t));
    const FitReport r = fit_reverse(m, t);
    const LogLinearFit l = fit_loglinear(m, t);
    CHECK(r.conditioning == 'x');
    CHECK((f.lambda_hat.theta - r.lambda_hat.theta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.lambda_hat.theta - l.theta).cwiseAbs().maxCoeff() < 1e-8);
    const Matrix cf = wald_cov(f), cr = wald_cov(r);
    CHECK((cf - cr).cwiseAbs().maxCoeff() / cf.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((cf - l.cov_theta).cwiseAbs().maxCoeff() / cf.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((l.fitted.rowwise().sum() * t.counts.sum() - t.counts.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("restricted model: reverse fit maps theta back") {
  ContingencyTable t = table({{12, 7, 9}, {5, 14, 8}, {6, 9, 20}});
  Matrix a(1, 2), b(1, 2);
  a << 1, 2;
  b << 1, 1;
  const AssociationModel m = restrict_bilinear(make_log_bilinear(2, 2), a, b);
  const FitReport f = fit(m, strata_by_column(t));
  const FitReport r = fit_reverse(m, t);
  const LogLinearFit l = fit_loglinear(m, t);
  CHECK(f.lambda_hat.theta[0] == doctest::Approx(r.lambda_hat.theta[0]).epsilon(1e-8));
  CHECK(f.lambda_hat.theta[0] == doctest::Approx(l.theta[0]).epsilon(1e-8));
}

TEST_CASE("frozen-theta log-linear fit only matches margins") {
  const ContingencyTable t = table({{10, 20}, {30, 40}});
  LogLinearOptions o;
  o.freeze_theta = true;
  o.frozen_theta = Vector::Constant(1, 0.0);
  const LogLinearFit l = fit_loglinear(make_log_bilinear(1, 1), t, o);
  CHECK(l.theta[0] == 0.0);
  CHECK(l.fitted(1, 1) == doctest::Approx(0.7 * 0.6).epsilon(1e-10));
}

TEST_CASE("separated tables have no estimate") {
  const AssociationModel m = make_log_bilinear(1, 1);
  CHECK_THROWS_AS(fit(m, strata_by_column(table({{10, 0}, {0, 40}}))), DivergenceError);
  CHECK_THROWS_AS(fit(m, strata_by_column(table({{10, 5}, {0, 40}}))), DivergenceError);
  CHECK_THROWS_AS(fit(m, strata_by_column(table({{0, 5}, {10, 40}}))), DivergenceError);
  CHECK_THROWS_AS(fit_reverse(m, table({{10, 5}, {0, 40}})), DivergenceError);
}

TEST_CASE("rank conditions") {
  ContingencyTable t = table({{10, 20, 5}, {30, 40, 7}});
  t.v_support.resize(2, 3);
  t.v_support << 0, 1, 2, 0, 2, 4;
  CHECK_THROWS_AS(fit(make_log_bilinear(1, 2), strata_by_column(t)), IdentifiabilityError);
  const auto diags = check_conditions(make_log_bilinear(1, 2), strata_by_column(t));
  bool rk = false;
  for (const auto& d : diags) rk = rk || (d.code == "outcome_rank" && d.severity == Severity::error);
  CHECK(rk);

  // Every stratum sees the same single covariate value: no information on theta.
  Matrix v(1, 2), z(1, 1);
  v << 0, 1;
  z << 1;
  const ConditionalDataset flat(v, {Stratum{z, Vector::Constant(1, 5)}, Stratum{z, Vector::Constant(1, 7)}});
  CHECK_THROWS_AS(fit(make_log_bilinear(1, 1), flat), IdentifiabilityError);
}

TEST_CASE("iteration budget") {
  const ContingencyTable t = table({{10, 20}, {30, 40}});
  FitOptions o;
  o.max_iter = 1;
  CHECK_THROWS_AS(fit(make_log_bilinear(1, 1), strata_by_column(t), o), ConvergenceError);
  o.max_iter = 100;
  o.init_theta = Vector::Constant(1, 3.0);
  o.init_gamma = Vector::Constant(1, -2.0);
  const FitReport r = fit(make_log_bilinear(1, 1), strata_by_column(t), o);
  CHECK(r.lambda_hat.theta[0] == doctest::Approx(std::log(2.0 / 3)).epsilon(1e-10));
}

TEST_CASE("non-bilinear association fits to a stationary point") {
  GeneralModelSpec spec;
  spec.param_dim = 1;
  spec.dim_x = 1;
  spec.dim_y = 1;
  spec.g = [](ConstVec z, ConstVec v, ConstVec t) { return z[0] * v[0] * (t[0] + 0.3 * std::sin(t[0])); };
  spec.grad = [](ConstVec z, ConstVec v, ConstVec t) {
    return Vector::Constant(1, z[0] * v[0] * (1 + 0.3 * std::cos(t[0])));
  };
  spec.hess = [](ConstVec z, ConstVec v, ConstVec t) {
    return Matrix::Constant(1, 1, -0.3 * z[0] * v[0] * std::sin(t[0]));
  };
  const AssociationModel m = AssociationModel::general(spec);
  const ContingencyTable t = table({{10, 20}, {30, 40}});
  const FitReport r = fit(m, strata_by_column(t));
  const double th = r.lambda_hat.theta[0];
  // The saturated log odds ratio is reproduced through the reparametrization.
  CHECK(th + 0.3 * std::sin(th) == doctest::Approx(std::log(2.0 / 3)).epsilon(1e-9));
  CHECK(r.final_grad_norm <= 1e-8);
}

TEST_CASE("moment diagnostics are informational") {
  const ContingencyTable t = table({{10, 20}, {30, 40}});
  const auto d = check_conditions(make_log_bilinear(1, 1), strata_by_column(t));
  int infos = 0;
  for (const auto& x : d) {
    CHECK(x.severity != Severity::error);
    if (x.severity == Severity::info) ++infos;
  }
  CHECK(infos >= 2);
  CHECK(std::string(severity_name(Severity::warning)) == "warning");
}
