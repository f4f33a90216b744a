#include "cli/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "assoc/inference.hpp"
#include "assoc/linalg.hpp"

namespace assoc::cli {

json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

json fit_report(const FitReport& fit, const AssociationModel& model, double level,
                const std::vector<NamedTest>& tests) {
  const Index s = fit.theta_dim();
  const Index k = fit.lambda_hat.gamma_star.size();
  const Matrix cov = inverse_spd(fit.observed_info_at_hat, "observed information");
  const Vector est = fit.lambda_hat.stacked();
  const double zq = normal_quantile(0.5 * (1.0 + level));

  json params = json::array();
  for (Index i = 0; i < s + k; ++i) {
    const double se = std::sqrt(cov(i, i));
    json p;
    if (i < s) {
      p["name"] = model.param_name(i);
      p["block"] = "theta";
      p["index"] = i;
      if (model.is_log_bilinear()) {
        p["row"] = i / model.theta_cols();
        p["col"] = i % model.theta_cols();
      }
    } else {
      p["name"] = "gamma_star[" + std::to_string(i - s + 1) + "]";
      p["block"] = "gamma_star";
      p["index"] = i - s + 1;
    }
    p["estimate"] = est[i];
    p["std_error"] = se;
    p["ci_lower"] = est[i] - zq * se;
    p["ci_upper"] = est[i] + zq * se;
    params.push_back(std::move(p));
  }

  json wald = json::array();
  for (const auto& t : tests) {
    const WaldTest w = wald_test(fit, t.contrast);
    wald.push_back({{"name", t.name}, {"statistic", w.statistic}, {"df", w.df}, {"p_value", w.p_value}});
  }

  json diags = json::array();
  for (const auto& d : fit.diagnostics) {
    diags.push_back({{"code", d.code}, {"severity", severity_name(d.severity)}, {"message", d.message}});
  }

  json layout = {{"order", "row-major"}, {"size", s}};
  if (model.is_log_bilinear()) {
    layout["rows"] = model.theta_rows();
    layout["cols"] = model.theta_cols();
  }

  json out;
  out["model"] = {{"kind", model_kind_name(model.kind())},
                  {"dim_x", model.dim_x()},
                  {"dim_y", model.dim_y()},
                  {"theta_layout", layout}};
  out["conditioning"] = std::string(1, fit.conditioning);
  out["converged"] = fit.converged;
  out["iterations"] = fit.iterations;
  out["final_grad_norm"] = fit.final_grad_norm;
  out["loglik"] = fit.loglik_at_hat;
  out["n_vec"] = to_json(fit.n_vec);
  out["level"] = level;
  out["parameters"] = std::move(params);
  out["covariance"] = {{"theta", to_json(Matrix(cov.topLeftCorner(s, s)))}, {"full", to_json(cov)}};
  out["observed_info"] = to_json(fit.observed_info_at_hat);
  out["wald_tests"] = std::move(wald);
  out["diagnostics"] = std::move(diags);
  out["loglik_trace"] = fit.loglik_trace;
  return out;
}

std::string fit_summary(const json& report) {
  std::ostringstream os;
  os << "conditional likelihood fit (strata by " << report["conditioning"].get<std::string>()
     << "), " << report["iterations"].get<int>() << " iterations, loglik "
     << std::setprecision(10) << report["loglik"].get<double>() << "\n";
  const double level = report["level"].get<double>();
  os << std::left << std::setw(16) << "parameter" << std::right << std::setw(14) << "estimate"
     << std::setw(14) << "std.error" << std::setw(28)
     << (std::to_string(static_cast<int>(std::lround(level * 100))) + "% interval") << "\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto& p : report["parameters"]) {
    os << std::left << std::setw(16) << p["name"].get<std::string>() << std::right << std::setw(14)
       << p["estimate"].get<double>() << std::setw(14) << p["std_error"].get<double>() << "    ("
       << p["ci_lower"].get<double>() << ", " << p["ci_upper"].get<double>() << ")\n";
  }
  for (const auto& w : report["wald_tests"]) {
    os << "wald " << w["name"].get<std::string>() << ": stat " << w["statistic"].get<double>()
       << ", df " << w["df"].get<long>() << ", p " << w["p_value"].get<double>() << "\n";
  }
  for (const auto& d : report["diagnostics"]) {
    os << d["severity"].get<std::string>() << " [" << d["code"].get<std::string>()
       << "] " << d["message"].get<std::string>() << "\n";
  }
  return os.str();
}

json coverage_summary(const CoverageResult& r) {
  return {{"mode", "coverage"},
          {"theta0", to_json(r.theta0)},
          {"coverage", to_json(r.coverage)},
          {"mean_width", to_json(r.mean_width)},
          {"standardized", {{"mean", r.std_mean}, {"variance", r.std_var}, {"skewness", r.std_skew}}},
          {"empirical_cov", to_json(r.empirical_cov)},
          {"oracle_cov", to_json(r.oracle_cov)},
          {"cov_rel_error", r.cov_rel_error},
          {"used", r.used},
          {"excluded", r.excluded}};
}

namespace {
std::ostringstream csv_stream() {
  std::ostringstream os;
  os.precision(17);
  return os;
}
}  // namespace

std::string coverage_csv(const CoverageResult& r) {
  auto os = csv_stream();
  const Index s = r.theta0.size();
  os << "replicate,status";
  for (Index i = 0; i < s; ++i) os << ",theta_hat_" << i;
  for (Index i = 0; i < s; ++i) os << ",std_error_" << i;
  os << "\n";
  for (const auto& rec : r.replicates) {
    os << rec.index << ',' << rec.status;
    for (Index i = 0; i < s; ++i) os << ',' << (rec.used ? rec.theta_hat[i] : NAN);
    for (Index i = 0; i < s; ++i) os << ',' << (rec.used ? rec.std_error[i] : NAN);
    os << "\n";
  }
  return os.str();
}

json consistency_summary(const ConsistencyResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"sizes", to_json(row.sizes)},
                    {"rmse", row.rmse},
                    {"mean_theta", to_json(row.mean_theta)},
                    {"max_bias", row.max_bias},
                    {"used", row.used},
                    {"excluded", row.excluded}});
  }
  return {{"mode", "consistency"},
          {"theta0", to_json(r.theta0)},
          {"rows", rows},
          {"rmse_decreasing", r.rmse_decreasing}};
}

std::string consistency_csv(const ConsistencyResult& r) {
  auto os = csv_stream();
  os << "n,rmse,max_bias,used,excluded\n";
  for (const auto& row : r.rows) {
    os << row.n << ',' << row.rmse << ',' << row.max_bias << ',' << row.used << ',' << row.excluded
       << "\n";
  }
  return os.str();
}

json invariance_summary(const InvarianceResult& r) {
  return {{"mode", "invariance"},
          {"max_theta_gap", r.max_theta_gap},
          {"max_cov_gap", r.max_cov_gap},
          {"used", r.used},
          {"excluded", r.excluded}};
}

std::string invariance_csv(const InvarianceResult& r) {
  auto os = csv_stream();
  os << "replicate,status,theta_gap,cov_gap\n";
  for (const auto& rec : r.replicates) {
    os << rec.index << ',' << rec.status << ',' << rec.theta_gap << ',' << rec.cov_gap << "\n";
  }
  return os.str();
}

std::string timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace assoc::cli
