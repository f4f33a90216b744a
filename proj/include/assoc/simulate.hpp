#pragma once

// Synthetic data under the three sampling schemes and Monte-Carlo checks of
// consistency, coverage and sampling-scheme invariance.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "assoc/distfactory.hpp"
#include "assoc/estimator.hpp"
#include "assoc/inference.hpp"

namespace assoc {

// Counter-based generator: draw i of stream s under seed is a splitmix64
// finalizer applied to key(seed, s) + i * golden. Streams are independent
// functions of (seed, stream), so replicate r always sees the same numbers
// whatever order replicates run in.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // A child stream; distinct labels give unrelated sequences.
  CounterRng split(std::uint64_t label) const;

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class Scheme { unconditional, cond_on_y, cond_on_x };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

// n_k draws from p(x | y_k) for each column k. n_vec has one integer entry
// >= 1 per column.
ConditionalDataset sample_cond_on_y(const FiniteJoint& joint, const Vector& n_vec,
                                    std::uint64_t seed);

// One multinomial(n, probs) table; cells are visited in row-major order.
ContingencyTable sample_unconditional(const FiniteJoint& joint, long n, std::uint64_t seed);

// m_j draws from p(y | x_j) for each row j. Strata are rows: the returned
// dataset has v_levels = z_support and covariates from v_support.
ConditionalDataset sample_cond_on_x(const FiniteJoint& joint, const Vector& m_vec,
                                    std::uint64_t seed);

// Count table drawn under a scheme. sizes: n_vec (K+1) for cond_on_y, m_vec
// (J+1) for cond_on_x, a single total for unconditional.
Matrix draw_counts(const FiniteJoint& joint, Scheme scheme, const Vector& sizes, CounterRng& rng);

struct McConfig {
  McConfig(AssociationModel m, FiniteJoint j) : model(std::move(m)), joint(std::move(j)) {}

  AssociationModel model;
  FiniteJoint joint;
  Scheme scheme = Scheme::cond_on_y;
  Vector sizes;  // see draw_counts
  int replicates = 1000;
  std::uint64_t seed = 1;
  double level = 0.95;
  FitOptions fit;
  std::optional<Vector> true_theta;      // required for non-log-bilinear models
  double max_excluded_fraction = 0.01;   // exceeded -> ConvergenceError
  int threads = 0;                       // 0: hardware concurrency
};

// theta at the joint, for cfg.model (least squares unless cfg.true_theta).
TrueParameters mc_truth(const McConfig& cfg);

struct ConsistencyRow {
  double n = 0.0;  // total sample size
  Vector sizes;
  double rmse = 0.0;  // sqrt(mean ||theta_hat - theta0||^2)
  Vector mean_theta;
  double max_bias = 0.0;
  int used = 0;
  int excluded = 0;
};

struct ConsistencyResult {
  Vector theta0;
  std::vector<ConsistencyRow> rows;
  bool rmse_decreasing = true;
};

// cfg.sizes fixes the stratum proportions; each n in n_grid rescales them.
ConsistencyResult mc_consistency(const McConfig& cfg, const std::vector<double>& n_grid);

struct ReplicateRecord {
  int index = 0;
  bool used = false;
  std::string status;  // "ok" or the error category of an excluded fit
  Vector theta_hat;
  Vector std_error;
};

struct CoverageResult {
  Vector theta0;
  Vector coverage;    // per component
  Vector mean_width;  // per component
  double std_mean = 0.0;  // pooled standardized estimates
  double std_var = 0.0;
  double std_skew = 0.0;
  Matrix empirical_cov;  // of sqrt(n) (theta_hat - theta0)
  Matrix oracle_cov;     // n [I^-1]_tt from exact moments
  double cov_rel_error = 0.0;  // max |emp - oracle| / max |oracle|
  int used = 0;
  int excluded = 0;
  std::vector<ReplicateRecord> replicates;
};

CoverageResult mc_coverage(const McConfig& cfg);

struct InvarianceRecord {
  int index = 0;
  bool used = false;
  std::string status;
  double theta_gap = 0.0;
  double cov_gap = 0.0;
};

struct InvarianceResult {
  double max_theta_gap = 0.0;  // forward vs reverse vs log-linear theta_hat
  double max_cov_gap = 0.0;    // relative, theta blocks
  int used = 0;
  int excluded = 0;
  std::vector<InvarianceRecord> replicates;
};

// Per replicate: one unconditional table of size n, fitted three ways.
InvarianceResult mc_invariance(const AssociationModel& model, const FiniteJoint& joint, long n,
                               std::uint64_t seed, int replicates, const FitOptions& fit = {},
                               int threads = 0);

// Discrepancies between the three fits of one table.
InvarianceRecord compare_fits(const AssociationModel& model, const ContingencyTable& table,
                              const FitOptions& fit = {});

}  // namespace assoc
