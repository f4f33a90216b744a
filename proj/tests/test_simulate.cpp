#include <doctest.h>

#include <cmath>
#include <set>

#include "assoc/errors.hpp"
#include "assoc/simulate.hpp"

using namespace assoc;

namespace {

FiniteJoint benchmark_joint() {
  Matrix psi(1, 1);
  psi << std::log(2.0);
  return ipf_fit((Vector(2) << 0.6, 0.4).finished(), (Vector(2) << 0.5, 0.5).finished(), psi,
                 indicator_support(2), indicator_support(2));
}

FiniteJoint fixture_joint() {
  Matrix p(2, 2);
  p << 10, 20, 30, 40;
  return FiniteJoint::with_indicator_supports(p / p.sum());
}

FiniteJoint joint_3x3() {
  Matrix p(3, 3);
  p << 0.08, 0.12, 0.10, 0.15, 0.05, 0.10, 0.07, 0.13, 0.20;
  return FiniteJoint::with_indicator_supports(p);
}

}  // namespace

TEST_CASE("counter rng") {
  CounterRng a(5), b(5), c(6);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  CHECK(a() != c());
  CHECK(a.counter() == 11);

  // streams are functions of (seed, stream) only
  CounterRng s3(9, 3);
  const auto first = s3();
  CounterRng again(9, 3);
  for (int i = 0; i < 100; ++i) CounterRng(9, 7)();
  CHECK(again() == first);

  CounterRng u(1);
  double mean = 0.0;
  bool in_range = true;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = u.uniform();
    in_range = in_range && x >= 0.0 && x < 1.0;
    mean += x;
  }
  CHECK(in_range);
  CHECK(mean / n == doctest::Approx(0.5).epsilon(0.01));

  CounterRng root(3);
  std::set<std::uint64_t> seen;
  for (std::uint64_t l = 0; l < 50; ++l) seen.insert(root.split(l)());
  CHECK(seen.size() == 50);
}

TEST_CASE("scheme names") {
  CHECK(parse_scheme("cond_on_y") == Scheme::cond_on_y);
  CHECK(parse_scheme("cond_on_x") == Scheme::cond_on_x);
  CHECK(parse_scheme("unconditional") == Scheme::unconditional);
  CHECK(std::string(scheme_name(Scheme::cond_on_x)) == "cond_on_x");
  CHECK_THROWS_AS(parse_scheme("case_control"), ConfigError);
}

TEST_CASE("samplers are deterministic and respect sizes") {
  const FiniteJoint j = joint_3x3();
  const Vector n_vec = (Vector(3) << 40, 50, 60).finished();
  const ConditionalDataset d1 = sample_cond_on_y(j, n_vec, 11);
  const ConditionalDataset d2 = sample_cond_on_y(j, n_vec, 11);
  CHECK(d1.counts() == d2.counts());
  CHECK(d1.counts() == n_vec);
  for (Index k = 0; k < 3; ++k) {
    CHECK(d1.stratum(k).z == d2.stratum(k).z);
    CHECK(d1.stratum(k).weight == d2.stratum(k).weight);
  }

  const ContingencyTable t = sample_unconditional(j, 500, 4);
  CHECK(t.counts.sum() == 500);
  CHECK(sample_unconditional(j, 500, 4).counts == t.counts);
  CHECK(sample_unconditional(j, 500, 5).counts != t.counts);

  const ContingencyTable one = sample_unconditional(j, 1, 2);
  CHECK(one.counts.sum() == 1);
  CHECK(one.counts.maxCoeff() == 1);

  const Vector m_vec = (Vector(3) << 7, 8, 9).finished();
  const ConditionalDataset dx = sample_cond_on_x(j, m_vec, 1);
  CHECK(dx.counts() == m_vec);
  CHECK(dx.v_levels() == j.z_support());

  CounterRng rng(1);
  CHECK_THROWS_AS(draw_counts(j, Scheme::cond_on_y, Vector::Constant(2, 5.0), rng), ArgumentError);
  CHECK_THROWS_AS(draw_counts(j, Scheme::unconditional, Vector::Constant(3, 5.0), rng),
                  ArgumentError);
}

TEST_CASE("large samples reproduce the conditionals") {
  const FiniteJoint j = joint_3x3();
  const Vector n_vec = Vector::Constant(3, 1e5);
  CounterRng rng(21);
  const Matrix counts = draw_counts(j, Scheme::cond_on_y, n_vec, rng);
  const Vector col = j.col_margin();
  for (Index k = 0; k < 3; ++k)
    for (Index r = 0; r < 3; ++r) CHECK(std::abs(counts(r, k) / 1e5 - j.probs()(r, k) / col[k]) < 0.01);

  CounterRng rng2(22);
  const Matrix all = draw_counts(j, Scheme::unconditional, Vector::Constant(1, 2e5), rng2);
  CHECK(((all / 2e5) - j.probs()).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("cell counts match expectations over replicates") {
  const FiniteJoint j = joint_3x3();
  const Vector m_vec = (Vector(3) << 30, 20, 25).finished();
  const int reps = 400;
  Matrix sum = Matrix::Zero(3, 3);
  for (int r = 0; r < reps; ++r) {
    CounterRng rng(17, static_cast<std::uint64_t>(r));
    sum += draw_counts(j, Scheme::cond_on_x, m_vec, rng);
  }
  const Vector row = j.row_margin();
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b) {
      const double p = j.probs()(a, b) / row[a];
      const double expect = m_vec[a] * p;
      const double se = std::sqrt(m_vec[a] * p * (1 - p) / reps);
      CHECK(std::abs(sum(a, b) / reps - expect) <= 3.5 * se);
    }
}

TEST_CASE("truth on the benchmark joint") {
  McConfig cfg(make_log_bilinear(1, 1), benchmark_joint());
  cfg.sizes = (Vector(2) << 250, 250).finished();
  const TrueParameters tp = mc_truth(cfg);
  CHECK(tp.lambda.theta[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(tp.misspecification < 1e-12);
}

TEST_CASE("consistency run shrinks the error") {
  McConfig cfg(make_log_bilinear(1, 1), benchmark_joint());
  cfg.sizes = (Vector(2) << 1, 1).finished();
  cfg.replicates = 200;
  cfg.seed = 3;
  const ConsistencyResult res = mc_consistency(cfg, {200, 3200});
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].sizes.sum() == doctest::Approx(200));
  CHECK(res.rows[1].sizes.sum() == doctest::Approx(3200));
  CHECK(res.rmse_decreasing);
  const double ratio = res.rows[0].rmse / res.rows[1].rmse;
  CHECK(ratio > 2.8);
  CHECK(ratio < 5.5);
  CHECK(res.rows[1].max_bias < 0.03);
  CHECK(res.rows[1].used + res.rows[1].excluded == 200);

  const ConsistencyResult again = mc_consistency(cfg, {200, 3200});
  CHECK(again.rows[0].rmse == res.rows[0].rmse);
}

TEST_CASE("coverage run is reproducible and independent of threading") {
  McConfig cfg(make_log_bilinear(1, 1), benchmark_joint());
  cfg.sizes = (Vector(2) << 300, 300).finished();
  cfg.replicates = 300;
  cfg.seed = 8;
  cfg.threads = 1;
  const CoverageResult one = mc_coverage(cfg);
  cfg.threads = 3;
  const CoverageResult three = mc_coverage(cfg);
  REQUIRE(one.replicates.size() == 300);
  for (std::size_t r = 0; r < 300; ++r) {
    CHECK(one.replicates[r].index == static_cast<int>(r));
    if (one.replicates[r].used) CHECK(one.replicates[r].theta_hat == three.replicates[r].theta_hat);
  }
  CHECK(one.coverage[0] == three.coverage[0]);
  CHECK(one.coverage[0] > 0.9);
  CHECK(one.coverage[0] < 0.99);
  CHECK(one.std_var == doctest::Approx(1.0).epsilon(0.2));
  CHECK(one.cov_rel_error < 0.25);
  CHECK(one.oracle_cov(0, 0) > 0.0);
}

TEST_CASE("coverage under the other schemes") {
  McConfig cfg(make_log_bilinear(1, 1), benchmark_joint());
  cfg.replicates = 300;
  cfg.seed = 12;
  cfg.scheme = Scheme::cond_on_x;
  cfg.sizes = (Vector(2) << 300, 300).finished();
  const CoverageResult x = mc_coverage(cfg);
  CHECK(x.coverage[0] > 0.9);
  CHECK(x.cov_rel_error < 0.25);

  cfg.scheme = Scheme::unconditional;
  cfg.sizes = Vector::Constant(1, 600);
  const CoverageResult u = mc_coverage(cfg);
  CHECK(u.coverage[0] > 0.9);
  CHECK(u.cov_rel_error < 0.25);
}

TEST_CASE("too many excluded replicates") {
  Matrix p(2, 2);
  p << 0.49, 0.01, 0.01, 0.49;
  McConfig cfg(make_log_bilinear(1, 1), FiniteJoint::with_indicator_supports(p));
  cfg.sizes = (Vector(2) << 4, 4).finished();
  cfg.replicates = 50;
  cfg.max_excluded_fraction = 0.0;
  CHECK_THROWS_AS(mc_coverage(cfg), ConvergenceError);
  cfg.max_excluded_fraction = 1.0;
  const CoverageResult res = mc_coverage(cfg);
  CHECK(res.excluded > 0);
  CHECK(res.used + res.excluded == 50);
}

TEST_CASE("three fits agree on sampled tables") {
  const InvarianceResult fx = mc_invariance(make_log_bilinear(1, 1), fixture_joint(), 400, 2, 20);
  CHECK(fx.used == 20);
  CHECK(fx.max_theta_gap <= 1e-8);
  CHECK(fx.max_cov_gap <= 1e-8);

  const InvarianceResult r3 = mc_invariance(make_log_bilinear(2, 2), joint_3x3(), 800, 5, 20);
  CHECK(r3.used >= 19);
  CHECK(r3.max_theta_gap <= 1e-6);
  CHECK(r3.max_cov_gap <= 1e-6);
}

TEST_CASE("compare fits on the fixture table") {
  ContingencyTable t;
  t.counts.resize(2, 2);
  t.counts << 10, 20, 30, 40;
  t.z_support = indicator_support(2);
  t.v_support = indicator_support(2);
  const InvarianceRecord rec = compare_fits(make_log_bilinear(1, 1), t);
  CHECK(rec.used);
  CHECK(rec.theta_gap <= 1e-8);
  CHECK(rec.cov_gap <= 1e-8);
}
