#include "cli/verify.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "assoc/distfactory.hpp"
#include "assoc/errors.hpp"
#include "assoc/inference.hpp"
#include "assoc/kernels.hpp"
#include "assoc/simulate.hpp"

namespace assoc::cli {

namespace {

std::string fmt(const char* label, double value) {
  std::ostringstream os;
  os << label << " = " << std::setprecision(3) << value;
  return os.str();
}

Matrix random_probs(CounterRng& rng, Index rows, Index cols) {
  Matrix p(rows, cols);
  for (Index j = 0; j < rows; ++j)
    for (Index k = 0; k < cols; ++k) p(j, k) = std::exp(3.0 * (rng.uniform() - 0.5));
  return p / p.sum();
}

Index random_int(CounterRng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

CheckResult closed_form() {
  ContingencyTable t;
  t.counts.resize(2, 2);
  t.counts << 10, 20, 30, 40;
  t.z_support = indicator_support(2);
  t.v_support = indicator_support(2);
  const FitReport rep = fit(make_log_bilinear(1, 1), strata_by_column(t));
  const double theta_err = std::abs(rep.lambda_hat.theta[0] - std::log(2.0 / 3.0));
  const double var_err = std::abs(wald_cov(rep)(0, 0) - (1.0 / 10 + 1.0 / 20 + 1.0 / 30 + 1.0 / 40));
  const double gamma_err = std::abs(rep.lambda_hat.gamma_star[0] - std::log(2.0));
  const double worst = std::max({theta_err, var_err, gamma_err});
  return {"closed_form_2x2", worst <= 1e-8, fmt("max error", worst)};
}

std::vector<CheckResult> moment_checks(CounterRng& rng, int instances) {
  double w_res = 0.0, gap = 0.0, mean = 0.0, hess = 0.0;
  for (int i = 0; i < instances; ++i) {
    const Index rows = random_int(rng, 2, 6);
    const Index cols = random_int(rng, 2, 4);
    const FiniteJoint joint = FiniteJoint::with_indicator_supports(random_probs(rng, rows, cols));
    Vector n_vec(cols);
    for (Index k = 0; k < cols; ++k) n_vec[k] = static_cast<double>(random_int(rng, 20, 500));
    const AssociationModel model = make_log_bilinear(rows - 1, cols - 1);
    const TrueParameters tp = true_lambda(model, joint, n_vec);
    const ExactMoments em = exact_moments(model, tp.lambda, joint, n_vec);
    w_res = std::max(w_res, w_identity_residual(em.info, em.sigma, w_matrix(n_vec)));
    gap = std::max(gap, sandwich_cov(em.info, em.sigma, model.param_dim()).theta_block_gap);
    mean = std::max(mean, em.mean_score.cwiseAbs().maxCoeff());
    hess = std::max(hess, (em.info - em.info_hessian).cwiseAbs().maxCoeff() /
                              std::max(1.0, em.info.cwiseAbs().maxCoeff()));
  }
  return {{"w_matrix_identity", w_res <= 1e-8, fmt("max residual", w_res)},
          {"sandwich_theta_block", gap <= 1e-8, fmt("max relative gap", gap)},
          {"score_mean_zero", mean <= 1e-12, fmt("max |E score|", mean)},
          {"information_two_routes", hess <= 1e-10, fmt("max relative gap", hess)}};
}

CheckResult invariance(CounterRng& rng, int instances) {
  double theta_gap = 0.0, cov_gap = 0.0;
  int used = 0;
  for (int i = 0; i < instances; ++i) {
    ContingencyTable t;
    t.counts.resize(3, 3);
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 3; ++k) t.counts(j, k) = static_cast<double>(random_int(rng, 5, 60));
    t.z_support = indicator_support(3);
    t.v_support = indicator_support(3);
    const InvarianceRecord rec = compare_fits(make_log_bilinear(2, 2), t);
    theta_gap = std::max(theta_gap, rec.theta_gap);
    cov_gap = std::max(cov_gap, rec.cov_gap);
    ++used;
  }
  std::ostringstream os;
  os << "theta gap " << std::setprecision(3) << theta_gap << ", cov gap " << cov_gap << " over "
     << used << " tables";
  return {"sampling_invariance", theta_gap <= 1e-6 && cov_gap <= 1e-6, os.str()};
}

CheckResult ipf_round_trip(CounterRng& rng, int instances) {
  double margin = 0.0, odds = 0.0, init = 0.0;
  for (int i = 0; i < instances; ++i) {
    const Index rows = random_int(rng, 2, 12);
    const Index cols = random_int(rng, 2, 12);
    const Matrix target = random_probs(rng, rows, cols);
    const Vector px = target.rowwise().sum();
    const Vector py = target.colwise().sum().transpose();
    const Matrix psi = odds_ratio_matrix(target);
    const IpfResult a = ipf(px, py, psi);
    IpfOptions opt;
    opt.init_row_log = Vector::Constant(rows, 0.0);
    opt.init_col_log = Vector::Zero(cols);
    for (Index j = 0; j < rows; ++j) (*opt.init_row_log)[j] = 2.0 * (rng.uniform() - 0.5);
    for (Index k = 0; k < cols; ++k) (*opt.init_col_log)[k] = 2.0 * (rng.uniform() - 0.5);
    const IpfResult b = ipf(px, py, psi, opt);
    margin = std::max(margin, std::max(a.margin_residual, b.margin_residual));
    odds = std::max(odds, (odds_ratio_matrix(a.probs) - psi).cwiseAbs().maxCoeff());
    init = std::max(init, (a.probs - b.probs).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << std::setprecision(3) << "margins " << margin << ", odds ratios " << odds
     << ", start dependence " << init;
  return {"ipf_round_trip", margin <= 1e-12 && odds <= 1e-8 && init <= 1e-8, os.str()};
}

CheckResult derivatives(CounterRng& rng, int instances) {
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const Index dx = random_int(rng, 1, 3);
    const Index dy = random_int(rng, 1, 2);
    const Index levels = random_int(rng, 2, 4);
    const AssociationModel model = make_log_bilinear(dx, dy);
    Matrix v = Matrix::Zero(dy, levels);
    for (Index k = 1; k < levels; ++k)
      for (Index r = 0; r < dy; ++r) v(r, k) = 2.0 * rng.uniform() - 1.0;
    std::vector<Stratum> strata;
    for (Index k = 0; k < levels; ++k) {
      Stratum s;
      s.z.resize(dx, 4);
      for (Index c = 0; c < 4; ++c)
        for (Index r = 0; r < dx; ++r) s.z(r, c) = 2.0 * rng.uniform() - 1.0;
      s.weight = Vector::Constant(4, 1.0 + static_cast<double>(random_int(rng, 0, 3)));
      strata.push_back(std::move(s));
    }
    const ConditionalDataset data(v, std::move(strata));
    Lambda lam;
    lam.theta.resize(model.param_dim());
    for (Index r = 0; r < lam.theta.size(); ++r) lam.theta[r] = rng.uniform() - 0.5;
    lam.gamma_star.resize(levels - 1);
    for (Index r = 0; r < lam.gamma_star.size(); ++r) lam.gamma_star[r] = rng.uniform() - 0.5;

    const LikelihoodTerms t = evaluate(model, lam, data, Need::info);
    const Vector x = lam.stacked();
    const double h = 1e-5;
    Vector g_fd(x.size());
    Matrix h_fd(x.size(), x.size());
    for (Index a = 0; a < x.size(); ++a) {
      Vector xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const Lambda lp = Lambda::from_stacked(xp, lam.theta.size());
      const Lambda lm = Lambda::from_stacked(xm, lam.theta.size());
      g_fd[a] = (loglik(model, lp, data) - loglik(model, lm, data)) / (2 * h);
      h_fd.col(a) = -(score(model, lp, data) - score(model, lm, data)) / (2 * h);
    }
    worst = std::max(worst, (g_fd - t.score).cwiseAbs().maxCoeff() / std::max(1.0, t.score.cwiseAbs().maxCoeff()));
    worst = std::max(worst, (h_fd - t.info).cwiseAbs().maxCoeff() / std::max(1.0, t.info.cwiseAbs().maxCoeff()));
  }
  return {"derivatives_vs_differences", worst <= 1e-5, fmt("max relative error", worst)};
}

CheckResult kernels_agree(CounterRng& rng) {
  if (!kernels::avx2_table() || !kernels::cpu_supports_avx2()) {
    return {"kernel_agreement", true, "avx2 variant unavailable; scalar only"};
  }
  std::vector<double> x(1003), y(1003);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 40.0 * (rng.uniform() - 0.5);
    y[i] = rng.uniform();
  }
  double worst = 0.0;
  const auto& s = kernels::scalar_table();
  const auto& a = *kernels::avx2_table();
  const std::size_t n = x.size();
  worst = std::max(worst, std::abs(s.dot(x.data(), y.data(), n) - a.dot(x.data(), y.data(), n)) / 1e3);
  std::vector<double> es(n), ea(n);
  const double ss = s.exp_shift(x.data(), 20.0, es.data(), n);
  const double sa = a.exp_shift(x.data(), 20.0, ea.data(), n);
  worst = std::max(worst, std::abs(ss - sa) / ss);
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(es[i] - ea[i]) / std::max(es[i], 1e-300));
  return {"kernel_agreement", worst <= 1e-13, fmt("max relative difference", worst)};
}

template <class F>
void guarded(std::vector<CheckResult>& out, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    out.push_back({name, false, std::string("error: ") + e.what()});
  }
}

}  // namespace

std::vector<CheckResult> run_verify(std::uint64_t seed, int instances) {
  if (instances < 1) throw ArgumentError("verify: need at least one instance");
  std::vector<CheckResult> out;
  const CounterRng base(seed);
  guarded(out, "closed_form_2x2", [&] { out.push_back(closed_form()); });
  guarded(out, "moments", [&] {
    CounterRng r = base.split(1);
    for (auto& c : moment_checks(r, instances)) out.push_back(std::move(c));
  });
  guarded(out, "sampling_invariance", [&] {
    CounterRng r = base.split(2);
    out.push_back(invariance(r, instances));
  });
  guarded(out, "ipf_round_trip", [&] {
    CounterRng r = base.split(3);
    out.push_back(ipf_round_trip(r, instances));
  });
  guarded(out, "derivatives_vs_differences", [&] {
    CounterRng r = base.split(4);
    out.push_back(derivatives(r, instances));
  });
  guarded(out, "kernel_agreement", [&] {
    CounterRng r = base.split(5);
    out.push_back(kernels_agree(r));
  });
  return out;
}

}  // namespace assoc::cli
