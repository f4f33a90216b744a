#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "assoc/cli.hpp"
#include "assoc/inference.hpp"
#include "assoc/simulate.hpp"
#include "cli/config.hpp"
#include "cli/report.hpp"
#include "cli/verify.hpp"

namespace assoc::cli {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::argument:
    case ErrorCategory::config: return 2;
    case ErrorCategory::data:
    case ErrorCategory::consistency: return 3;
    case ErrorCategory::evaluation:
    case ErrorCategory::convergence: return 4;
    case ErrorCategory::identifiability: return 5;
  }
  return 1;
}

namespace {

// Written to a sibling temporary and renamed, so a failed run leaves no
// partial file behind.
void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write output file '" + path + "'");
    f << content;
    f.flush();
    if (!f) {
      std::remove(tmp.c_str());
      throw ConfigError("cannot write output file '" + path + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ConfigError("cannot move output into place at '" + path + "'");
  }
}

const std::string& require_data(const RunConfig& cfg) {
  if (!cfg.data_path) throw ConfigError(cfg.command + ": no data file (use --data or data.path)");
  return *cfg.data_path;
}

std::vector<NamedTest> wald_tests(const RunConfig& cfg, Index s, const AssociationModel& model) {
  std::vector<NamedTest> tests;
  for (Index i = 0; i < s; ++i) {
    Matrix c = Matrix::Zero(1, s);
    c(0, i) = 1.0;
    tests.push_back({model.param_name(i) + " = 0", c});
  }
  if (s > 1) tests.push_back({"theta = 0", Matrix::Identity(s, s)});
  if (const json* c = find(cfg.doc, "inference", "contrast")) {
    Matrix m = to_matrix(*c, "inference.contrast");
    if (m.cols() != s) throw ConfigError("inference.contrast must have one column per theta entry");
    tests.push_back({"contrast", std::move(m)});
  }
  return tests;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out) {
  const std::string& path = require_data(cfg);
  const std::string format = get_string(cfg.doc, "data", "format", "auto");
  const bool conditional = format == "auto" ? looks_conditional(path) : format == "conditional";
  if (format != "auto" && format != "conditional" && format != "table") {
    throw ConfigError("data.format must be auto, conditional or table");
  }

  FitReport rep;
  std::optional<AssociationModel> model;
  if (conditional) {
    if (cfg.command == "fit-reverse") {
      throw ConfigError("fit-reverse needs a two-way table, not a conditional sample");
    }
    const ConditionalDataset data = read_conditional_csv(path);
    model = build_model(cfg.doc, data.dim_x(), data.dim_y(), data.num_levels());
    rep = fit(*model, data, cfg.solver);
  } else {
    const ContingencyTable table = read_table_csv(path);
    const Matrix& n = table.counts;
    if (cfg.command == "fit-reverse" ? n.rowwise().sum().minCoeff() <= 0.0
                                     : n.colwise().sum().minCoeff() <= 0.0) {
      throw DataError("table has an empty stratum");
    }
    model = build_model(cfg.doc, table.z_support.rows(), table.v_support.rows(), n.cols());
    rep = cfg.command == "fit-reverse" ? fit_reverse(*model, table, cfg.solver)
                                       : fit(*model, strata_by_column(table), cfg.solver);
  }

  json report = fit_report(rep, *model, cfg.level, wald_tests(cfg, rep.theta_dim(), *model));
  report["command"] = cfg.command;
  if (cfg.timestamp) report["generated_at"] = timestamp_now();
  if (cfg.out_path) {
    write_atomic(*cfg.out_path, report.dump(2) + "\n");
    out << fit_summary(report);
  } else {
    out << report.dump(2) << "\n";
  }
  return 0;
}

int cmd_construct(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.doc.contains("construct")) throw ConfigError("construct: config needs a [construct] table");
  const FiniteJoint joint = build_joint(cfg.doc, "construct");
  std::ostringstream os;
  write_table_csv(os, joint.probs(), joint.z_support(), joint.v_support());
  if (cfg.out_path) {
    write_atomic(*cfg.out_path, os.str());
  } else {
    out << os.str();
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const json& d = cfg.doc;
  if (!d.contains("joint")) throw ConfigError("simulate: config needs a [joint] table");
  const FiniteJoint joint = build_joint(d, "joint");
  const AssociationModel model =
      build_model(d, joint.z_support().rows(), joint.v_support().rows(), joint.cols());
  const std::string mode = get_string(d, "simulate", "mode", "coverage");
  const int replicates = cfg.replicates.value_or(
      static_cast<int>(get_number(d, "simulate", "replicates", 1000)));
  const int threads = static_cast<int>(get_number(d, "simulate", "threads", 0));

  json summary;
  std::string csv;
  if (mode == "invariance") {
    const long n = static_cast<long>(get_number(d, "simulate", "n", 1000));
    const InvarianceResult r = mc_invariance(model, joint, n, cfg.seed, replicates, cfg.solver, threads);
    summary = invariance_summary(r);
    csv = invariance_csv(r);
  } else if (mode == "coverage" || mode == "consistency") {
    const json* sz = find(d, "simulate", "sizes");
    if (!sz) throw ConfigError("simulate: simulate.sizes is required");
    McConfig mc{model, joint};
    mc.scheme = parse_scheme(get_string(d, "simulate", "scheme", "cond_on_y"));
    mc.sizes = to_vector(*sz, "simulate.sizes");
    mc.replicates = replicates;
    mc.seed = cfg.seed;
    mc.level = cfg.level;
    mc.fit = cfg.solver;
    mc.threads = threads;
    mc.max_excluded_fraction = get_number(d, "simulate", "max_excluded_fraction", 0.01);
    if (const json* t = find(d, "simulate", "true_theta")) mc.true_theta = to_vector(*t, "simulate.true_theta");
    if (mode == "coverage") {
      const CoverageResult r = mc_coverage(mc);
      summary = coverage_summary(r);
      csv = coverage_csv(r);
    } else {
      const json* g = find(d, "simulate", "n_grid");
      if (!g) throw ConfigError("simulate: consistency mode needs simulate.n_grid");
      const Vector grid = to_vector(*g, "simulate.n_grid");
      const ConsistencyResult r =
          mc_consistency(mc, std::vector<double>(grid.data(), grid.data() + grid.size()));
      summary = consistency_summary(r);
      csv = consistency_csv(r);
    }
  } else {
    throw ConfigError("simulate.mode must be coverage, consistency or invariance");
  }
  summary["seed"] = cfg.seed;
  summary["replicates"] = replicates;
  if (cfg.timestamp) summary["generated_at"] = timestamp_now();
  if (cfg.out_path) write_atomic(*cfg.out_path, csv);
  out << summary.dump(2) << "\n";
  return 0;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const int instances = cfg.replicates.value_or(10);
  const auto checks = run_verify(cfg.seed, instances);
  bool ok = true;
  json arr = json::array();
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    ok = ok && c.passed;
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  if (cfg.out_path) {
    json report = {{"command", "verify"}, {"seed", cfg.seed}, {"instances", instances},
                   {"passed", ok}, {"checks", arr}};
    if (cfg.timestamp) report["generated_at"] = timestamp_now();
    write_atomic(*cfg.out_path, report.dump(2) + "\n");
  }
  return ok ? 0 : 1;
}

void emit_error(std::ostream& err, const std::string& category, const std::string& message, int code) {
  json e = {{"error", {{"category", category}, {"message", message}, {"exit_code", code}}}};
  err << e.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Odds-ratio association models: fit, construct, simulate, verify", "assoc"};
  RunConfig cfg;
  std::optional<std::string> config_path, data, out_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol, level;
  std::optional<int> max_iter, replicates;
  bool no_timestamp = false;
  app.add_option("command", cfg.command, "fit | fit-reverse | construct | simulate | verify")
      ->required()
      ->check(CLI::IsMember({"fit", "fit-reverse", "construct", "simulate", "verify"}));
  app.add_option("--config", config_path, "TOML or JSON config file");
  app.add_option("--data", data, "input CSV (conditional sample or two-way table)");
  app.add_option("--out", out_path, "output file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tol", tol, "gradient tolerance");
  app.add_option("--max-iter", max_iter, "Newton iteration limit");
  app.add_option("--level", level, "confidence level");
  app.add_option("--replicates", replicates, "Monte-Carlo replicates / verify instances");
  app.add_flag("--no-timestamp", no_timestamp, "omit the generated_at field");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "config", e.what(), 2);
    return 2;
  }

  try {
    if (config_path) cfg.doc = load_config_file(*config_path);
    apply_file_settings(cfg);
    if (data) cfg.data_path = data;
    if (out_path) cfg.out_path = out_path;
    if (seed) cfg.seed = *seed;
    if (tol) cfg.solver.grad_tol = *tol;
    if (max_iter) cfg.solver.max_iter = *max_iter;
    if (level) cfg.level = *level;
    if (replicates) cfg.replicates = *replicates;
    if (no_timestamp) cfg.timestamp = false;
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (!(cfg.solver.grad_tol > 0.0)) throw ConfigError("tol must be positive");
    if (cfg.solver.max_iter < 1) throw ConfigError("max-iter must be >= 1");
    if (cfg.replicates && *cfg.replicates < 1) throw ConfigError("replicates must be >= 1");

    if (cfg.command == "fit" || cfg.command == "fit-reverse") return cmd_fit(cfg, out);
    if (cfg.command == "construct") return cmd_construct(cfg, out);
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    return cmd_verify(cfg, out);
  } catch (const Error& e) {
    const int code = exit_code(e.category());
    emit_error(err, category_name(e.category()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what(), 1);
    return 1;
  }
}

}  // namespace assoc::cli
