#include "assoc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

#include "assoc/errors.hpp"
#include "assoc/inference.hpp"
#include "assoc/linalg.hpp"

namespace assoc {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Cumulative sums with the last entry pinned to the exact total.
std::vector<double> cumulative(const double* p, Index n, Index stride) {
  std::vector<double> c(static_cast<std::size_t>(n));
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    s += p[i * stride];
    c[static_cast<std::size_t>(i)] = s;
  }
  return c;
}

Index draw_index(const std::vector<double>& cum, CounterRng& rng) {
  const double u = rng.uniform() * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return std::min<Index>(static_cast<Index>(it - cum.begin()), static_cast<Index>(cum.size()) - 1);
}

long as_count(double x, const char* what) {
  if (!(x >= 1.0) || x != std::floor(x) || x > 1e12) {
    std::ostringstream os;
    os << what << ": sample sizes must be integers >= 1 (got " << x << ")";
    throw ArgumentError(os.str());
  }
  return static_cast<long>(x);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

ContingencyTable as_table(const FiniteJoint& joint, Matrix counts) {
  return {std::move(counts), joint.z_support(), joint.v_support()};
}

FitReport fit_scheme(const McConfig& cfg, const ContingencyTable& table) {
  if (cfg.scheme == Scheme::cond_on_x) return fit_reverse(cfg.model, table, cfg.fit);
  return fit(cfg.model, strata_by_column(table), cfg.fit);
}

void check_excluded(int excluded, int total, double max_fraction, const char* what) {
  if (excluded > static_cast<int>(std::floor(max_fraction * total))) {
    std::ostringstream os;
    os << what << ": " << excluded << " of " << total
       << " replicates had no usable fit, above the allowed fraction " << max_fraction;
    throw ConvergenceError(os.str());
  }
}

Vector scaled_sizes(const McConfig& cfg, double n) {
  if (cfg.scheme == Scheme::unconditional) return Vector::Constant(1, std::round(n));
  const Vector r = cfg.sizes / cfg.sizes.sum();
  Vector out(r.size());
  for (Index i = 0; i < r.size(); ++i) out[i] = std::max(1.0, std::round(n * r[i]));
  return out;
}

double max_rel(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(a.cwiseAbs().maxCoeff(), 1e-300);
}

// n [I^-1]_tt of the scheme's conditional likelihood, n the total size.
Matrix oracle_theta_cov(const McConfig& cfg, const Vector& theta0) {
  const double n = cfg.sizes.sum();
  const Index s = cfg.model.param_dim();
  if (cfg.scheme == Scheme::cond_on_x) {
    const AssociationModel dual = cfg.model.dual();
    const FiniteJoint jt = cfg.joint.transposed();
    const Vector dual_theta = cfg.model.theta_to_dual(theta0);
    const TrueParameters tp = true_lambda(dual, jt, cfg.sizes, dual_theta);
    const ExactMoments em = exact_moments(dual, tp.lambda, jt, cfg.sizes);
    const Matrix inv = inverse_spd(em.info, "expected information");
    Vector idx(s);
    for (Index i = 0; i < s; ++i) idx[i] = static_cast<double>(i);
    const Vector orig = cfg.model.theta_to_dual(idx);
    Matrix out(s, s);
    for (Index i = 0; i < s; ++i)
      for (Index j = 0; j < s; ++j)
        out(static_cast<Index>(orig[i]), static_cast<Index>(orig[j])) = n * inv(i, j);
    return out;
  }
  const Vector n_vec =
      cfg.scheme == Scheme::unconditional ? Vector(n * cfg.joint.col_margin()) : cfg.sizes;
  const TrueParameters tp = true_lambda(cfg.model, cfg.joint, n_vec, theta0);
  const ExactMoments em = exact_moments(cfg.model, tp.lambda, cfg.joint, n_vec);
  return n * inverse_spd(em.info, "expected information").topLeftCorner(s, s);
}

void validate_config(const McConfig& cfg) {
  if (cfg.replicates < 1) throw ArgumentError("simulate: replicates must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ArgumentError("simulate: level must lie in (0, 1)");
  const Index want = cfg.scheme == Scheme::cond_on_y   ? cfg.joint.cols()
                     : cfg.scheme == Scheme::cond_on_x ? cfg.joint.rows()
                                                       : 1;
  if (cfg.sizes.size() != want) {
    std::ostringstream os;
    os << "simulate: scheme " << scheme_name(cfg.scheme) << " needs " << want << " sample size(s)";
    throw ArgumentError(os.str());
  }
  for (Index i = 0; i < cfg.sizes.size(); ++i) as_count(cfg.sizes[i], "simulate");
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ (stream * kGolden + 0x632be59bd9b4e019ULL))) {}

CounterRng::result_type CounterRng::operator()() { return mix64(key_ + (++counter_) * kGolden); }

double CounterRng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

CounterRng CounterRng::split(std::uint64_t label) const { return CounterRng(key_, label + 1); }

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::unconditional: return "unconditional";
    case Scheme::cond_on_y: return "cond_on_y";
    case Scheme::cond_on_x: return "cond_on_x";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "unconditional") return Scheme::unconditional;
  if (name == "cond_on_y") return Scheme::cond_on_y;
  if (name == "cond_on_x") return Scheme::cond_on_x;
  throw ConfigError("unknown sampling scheme '" + name +
                    "' (expected unconditional, cond_on_y or cond_on_x)");
}

Matrix draw_counts(const FiniteJoint& joint, Scheme scheme, const Vector& sizes, CounterRng& rng) {
  const Matrix& p = joint.probs();
  Matrix counts = Matrix::Zero(joint.rows(), joint.cols());
  switch (scheme) {
    case Scheme::cond_on_y: {
      if (sizes.size() != joint.cols()) throw ArgumentError("draw_counts: need one size per column");
      for (Index k = 0; k < joint.cols(); ++k) {
        const long nk = as_count(sizes[k], "draw_counts");
        CounterRng sub = rng.split(static_cast<std::uint64_t>(k));
        const auto cum = cumulative(p.col(k).data(), p.rows(), 1);
        for (long i = 0; i < nk; ++i) counts(draw_index(cum, sub), k) += 1.0;
      }
      break;
    }
    case Scheme::cond_on_x: {
      if (sizes.size() != joint.rows()) throw ArgumentError("draw_counts: need one size per row");
      for (Index j = 0; j < joint.rows(); ++j) {
        const long mj = as_count(sizes[j], "draw_counts");
        CounterRng sub = rng.split(static_cast<std::uint64_t>(j));
        const auto cum = cumulative(p.data() + j, p.cols(), p.rows());
        for (long i = 0; i < mj; ++i) counts(j, draw_index(cum, sub)) += 1.0;
      }
      break;
    }
    case Scheme::unconditional: {
      if (sizes.size() != 1) throw ArgumentError("draw_counts: need a single total size");
      const long n = as_count(sizes[0], "draw_counts");
      // Row-major cell order.
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = p;
      const auto cum = cumulative(rm.data(), rm.size(), 1);
      for (long i = 0; i < n; ++i) {
        const Index c = draw_index(cum, rng);
        counts(c / p.cols(), c % p.cols()) += 1.0;
      }
      break;
    }
  }
  return counts;
}

ConditionalDataset sample_cond_on_y(const FiniteJoint& joint, const Vector& n_vec,
                                    std::uint64_t seed) {
  CounterRng rng(seed);
  return strata_by_column(as_table(joint, draw_counts(joint, Scheme::cond_on_y, n_vec, rng)));
}

ContingencyTable sample_unconditional(const FiniteJoint& joint, long n, std::uint64_t seed) {
  CounterRng rng(seed);
  return as_table(joint, draw_counts(joint, Scheme::unconditional,
                                     Vector::Constant(1, static_cast<double>(n)), rng));
}

ConditionalDataset sample_cond_on_x(const FiniteJoint& joint, const Vector& m_vec,
                                    std::uint64_t seed) {
  CounterRng rng(seed);
  return strata_by_row(as_table(joint, draw_counts(joint, Scheme::cond_on_x, m_vec, rng)));
}

TrueParameters mc_truth(const McConfig& cfg) {
  const Vector n_vec = cfg.scheme == Scheme::cond_on_y ? cfg.sizes : Vector(cfg.joint.col_margin());
  return true_lambda(cfg.model, cfg.joint, n_vec, cfg.true_theta);
}

ConsistencyResult mc_consistency(const McConfig& cfg, const std::vector<double>& n_grid) {
  validate_config(cfg);
  if (n_grid.empty()) throw ArgumentError("mc_consistency: empty size grid");
  ConsistencyResult out;
  out.theta0 = mc_truth(cfg).lambda.theta;
  const Index s = out.theta0.size();

  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    ConsistencyRow row;
    row.sizes = scaled_sizes(cfg, n_grid[g]);
    row.n = row.sizes.sum();
    std::vector<std::optional<Vector>> est(static_cast<std::size_t>(cfg.replicates));
    const CounterRng grid_rng = CounterRng(cfg.seed).split(g);
    parallel_for(cfg.replicates, cfg.threads, [&](int r) {
      CounterRng rng = grid_rng.split(static_cast<std::uint64_t>(r));
      try {
        const FitReport rep =
            fit_scheme(cfg, as_table(cfg.joint, draw_counts(cfg.joint, cfg.scheme, row.sizes, rng)));
        est[static_cast<std::size_t>(r)] = rep.lambda_hat.theta;
      } catch (const Error&) {
      }
    });
    row.mean_theta = Vector::Zero(s);
    double sq = 0.0;
    for (const auto& e : est) {
      if (!e) {
        ++row.excluded;
        continue;
      }
      ++row.used;
      row.mean_theta += *e;
      sq += (*e - out.theta0).squaredNorm();
    }
    check_excluded(row.excluded, cfg.replicates, cfg.max_excluded_fraction, "mc_consistency");
    row.mean_theta /= row.used;
    row.rmse = std::sqrt(sq / row.used);
    row.max_bias = (row.mean_theta - out.theta0).cwiseAbs().maxCoeff();
    if (!out.rows.empty() && !(row.rmse < out.rows.back().rmse)) out.rmse_decreasing = false;
    out.rows.push_back(std::move(row));
  }
  return out;
}

CoverageResult mc_coverage(const McConfig& cfg) {
  validate_config(cfg);
  CoverageResult out;
  out.theta0 = mc_truth(cfg).lambda.theta;
  const Index s = out.theta0.size();
  const double n = cfg.sizes.sum();
  out.oracle_cov = oracle_theta_cov(cfg, out.theta0);

  struct Draw {
    bool ok = false;
    std::string status;
    Vector theta;
    Matrix cov;
  };
  std::vector<Draw> draws(static_cast<std::size_t>(cfg.replicates));
  const CounterRng base(cfg.seed);
  parallel_for(cfg.replicates, cfg.threads, [&](int r) {
    CounterRng rng = base.split(static_cast<std::uint64_t>(r));
    Draw& d = draws[static_cast<std::size_t>(r)];
    try {
      const FitReport rep =
          fit_scheme(cfg, as_table(cfg.joint, draw_counts(cfg.joint, cfg.scheme, cfg.sizes, rng)));
      d.theta = rep.lambda_hat.theta;
      d.cov = wald_cov(rep);
      d.ok = true;
      d.status = "ok";
    } catch (const Error& e) {
      d.status = category_name(e.category());
    }
  });

  out.coverage = Vector::Zero(s);
  out.mean_width = Vector::Zero(s);
  std::vector<double> pooled;
  Vector mean = Vector::Zero(s);
  for (int r = 0; r < cfg.replicates; ++r) {
    const Draw& d = draws[static_cast<std::size_t>(r)];
    ReplicateRecord rec;
    rec.index = r;
    rec.status = d.status;
    rec.used = d.ok;
    if (!d.ok) {
      ++out.excluded;
      out.replicates.push_back(std::move(rec));
      continue;
    }
    ++out.used;
    rec.theta_hat = d.theta;
    rec.std_error = d.cov.diagonal().cwiseSqrt();
    const auto ci = conf_intervals(d.theta, d.cov, cfg.level);
    for (Index i = 0; i < s; ++i) {
      const auto& iv = ci[static_cast<std::size_t>(i)];
      if (iv.lower <= out.theta0[i] && out.theta0[i] <= iv.upper) out.coverage[i] += 1.0;
      out.mean_width[i] += iv.upper - iv.lower;
    }
    const Vector z = inverse_sqrt_spd(d.cov, "Wald covariance") * (d.theta - out.theta0);
    pooled.insert(pooled.end(), z.data(), z.data() + s);
    mean += d.theta;
    out.replicates.push_back(std::move(rec));
  }
  check_excluded(out.excluded, cfg.replicates, cfg.max_excluded_fraction, "mc_coverage");
  out.coverage /= out.used;
  out.mean_width /= out.used;
  mean /= out.used;

  out.empirical_cov = Matrix::Zero(s, s);
  for (const Draw& d : draws) {
    if (!d.ok) continue;
    const Vector c = std::sqrt(n) * (d.theta - mean);
    out.empirical_cov.noalias() += c * c.transpose();
  }
  out.empirical_cov /= std::max(1, out.used - 1);
  out.cov_rel_error = max_rel(out.oracle_cov, out.empirical_cov);

  double m = 0.0;
  for (double z : pooled) m += z;
  m /= static_cast<double>(pooled.size());
  double m2 = 0.0, m3 = 0.0;
  for (double z : pooled) {
    m2 += (z - m) * (z - m);
    m3 += (z - m) * (z - m) * (z - m);
  }
  m2 /= static_cast<double>(pooled.size());
  m3 /= static_cast<double>(pooled.size());
  out.std_mean = m;
  out.std_var = m2;
  out.std_skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return out;
}

InvarianceRecord compare_fits(const AssociationModel& model, const ContingencyTable& table,
                              const FitOptions& fit_opt) {
  const FitReport fwd = fit(model, strata_by_column(table), fit_opt);
  const FitReport rev = fit_reverse(model, table, fit_opt);
  LogLinearOptions llo;
  llo.solver = fit_opt;
  const LogLinearFit ll = fit_loglinear(model, table, llo);

  const Vector& a = fwd.lambda_hat.theta;
  const Vector& b = rev.lambda_hat.theta;
  const Vector& c = ll.theta;
  const Matrix ca = wald_cov(fwd);
  const Matrix cb = wald_cov(rev);
  const Matrix& cc = ll.cov_theta;

  InvarianceRecord rec;
  rec.used = true;
  rec.status = "ok";
  rec.theta_gap = std::max({(a - b).cwiseAbs().maxCoeff(), (a - c).cwiseAbs().maxCoeff(),
                            (b - c).cwiseAbs().maxCoeff()});
  rec.cov_gap = std::max({max_rel(ca, cb), max_rel(ca, cc), max_rel(cb, cc)});
  return rec;
}

InvarianceResult mc_invariance(const AssociationModel& model, const FiniteJoint& joint, long n,
                               std::uint64_t seed, int replicates, const FitOptions& fit_opt,
                               int threads) {
  if (replicates < 1) throw ArgumentError("mc_invariance: replicates must be >= 1");
  if (n < 1) throw ArgumentError("mc_invariance: n must be >= 1");
  InvarianceResult out;
  out.replicates.resize(static_cast<std::size_t>(replicates));
  const CounterRng base(seed);
  parallel_for(replicates, threads, [&](int r) {
    CounterRng rng = base.split(static_cast<std::uint64_t>(r));
    InvarianceRecord& rec = out.replicates[static_cast<std::size_t>(r)];
    try {
      const Matrix counts =
          draw_counts(joint, Scheme::unconditional, Vector::Constant(1, static_cast<double>(n)), rng);
      rec = compare_fits(model, as_table(joint, counts), fit_opt);
    } catch (const Error& e) {
      rec.used = false;
      rec.status = category_name(e.category());
    }
    rec.index = r;
  });
  for (const auto& rec : out.replicates) {
    if (!rec.used) {
      ++out.excluded;
      continue;
    }
    ++out.used;
    out.max_theta_gap = std::max(out.max_theta_gap, rec.theta_gap);
    out.max_cov_gap = std::max(out.max_cov_gap, rec.cov_gap);
  }
  return out;
}

}  // namespace assoc
