#include <doctest.h>

#include <cmath>
#include <random>

#include "assoc/errors.hpp"
#include "assoc/model.hpp"

using namespace assoc;

namespace {

Vector rand_vec(std::mt19937_64& g, Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(g);
  return v;
}

// z^T Theta v + sin(theta_0) z_0 v_0: non-bilinear, with a nonzero Hessian.
AssociationModel sine_model(Index dx, Index dy) {
  GeneralModelSpec spec;
  spec.param_dim = dx * dy;
  spec.dim_x = dx;
  spec.dim_y = dy;
  spec.name = "bilinear+sine";
  spec.g = [dx, dy](ConstVec z, ConstVec v, ConstVec t) {
    double s = 0;
    for (Index a = 0; a < dx; ++a)
      for (Index b = 0; b < dy; ++b) s += z[a] * t[a * dy + b] * v[b];
    return s + std::sin(t[0]) * z[0] * v[0];
  };
  spec.grad = [dx, dy](ConstVec z, ConstVec v, ConstVec t) {
    Vector g(dx * dy);
    for (Index a = 0; a < dx; ++a)
      for (Index b = 0; b < dy; ++b) g[a * dy + b] = z[a] * v[b];
    g[0] += std::cos(t[0]) * z[0] * v[0];
    return g;
  };
  spec.hess = [dx, dy](ConstVec z, ConstVec v, ConstVec t) {
    Matrix h = Matrix::Zero(dx * dy, dx * dy);
    h(0, 0) = -std::sin(t[0]) * z[0] * v[0];
    return h;
  };
  return AssociationModel::general(spec);
}

}  // namespace

TEST_CASE("log-bilinear psi is z^T Theta v with row-major theta") {
  std::mt19937_64 g(3);
  const AssociationModel m = make_log_bilinear(3, 2);
  CHECK(m.param_dim() == 6);
  CHECK(m.theta_rows() == 3);
  CHECK(m.theta_cols() == 2);
  const Vector z = rand_vec(g, 3), v = rand_vec(g, 2), t = rand_vec(g, 6);
  Eigen::Matrix<double, 3, 2, Eigen::RowMajor> theta;
  for (int i = 0; i < 6; ++i) theta.data()[i] = t[i];
  CHECK(m.psi(z, v, t) == doctest::Approx(z.dot(theta * v)).epsilon(1e-14));
  CHECK(m.psi(Vector::Zero(3), v, t) == 0.0);
  CHECK(m.psi(z, Vector::Zero(2), t) == 0.0);
  CHECK(m.param_name(3) == "theta[1,1]");
  CHECK(m.hess_vanishes());
  CHECK(m.hess(z, v, t).isZero(0.0));
  CHECK_THROWS_AS(m.psi(v, v, t), ArgumentError);
}

TEST_CASE("analytic theta-gradients match central differences") {
  std::mt19937_64 g(4);
  const double h = 1e-6;
  for (const AssociationModel& m : {make_log_bilinear(2, 3), sine_model(2, 2), make_multinomial_logit(2, 4)}) {
    for (int rep = 0; rep < 5; ++rep) {
      const Vector z = rand_vec(g, m.dim_x()), v = rand_vec(g, m.dim_y()), t = rand_vec(g, m.param_dim());
      const Vector an = m.grad(z, v, t);
      const Matrix hs = m.hess(z, v, t);
      for (Index r = 0; r < m.param_dim(); ++r) {
        Vector tp = t, tm = t;
        tp[r] += h;
        tm[r] -= h;
        CHECK(an[r] == doctest::Approx((m.psi(z, v, tp) - m.psi(z, v, tm)) / (2 * h)).epsilon(1e-7));
        const Vector col = (m.grad(z, v, tp) - m.grad(z, v, tm)) / (2 * h);
        for (Index c = 0; c < m.param_dim(); ++c) CHECK(hs(c, r) == doctest::Approx(col[c]).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("general models report a nonvanishing Hessian") {
  const AssociationModel m = sine_model(1, 1);
  CHECK_FALSE(m.hess_vanishes());
  Vector one = Vector::Ones(1);
  Vector t = Vector::Constant(1, 0.3);
  CHECK(m.hess(one, one, t)(0, 0) == doctest::Approx(-std::sin(0.3)));
  CHECK(m.kind() == ModelKind::general);
}

TEST_CASE("dual model swaps the roles of z and v") {
  std::mt19937_64 g(5);
  const AssociationModel m = make_log_bilinear(3, 2);
  const AssociationModel d = m.dual();
  CHECK(d.dim_x() == 2);
  CHECK(d.dim_y() == 3);
  const Vector z = rand_vec(g, 3), v = rand_vec(g, 2), t = rand_vec(g, 6);
  const Vector td = m.theta_to_dual(t);
  CHECK(d.psi(v, z, td) == doctest::Approx(m.psi(z, v, t)).epsilon(1e-14));
  CHECK(m.theta_from_dual(td) == t);
}

TEST_CASE("canonical GLM: theta = beta / dispersion") {
  const AssociationModel m = make_glm_canonical(2);
  CHECK(m.dim_y() == 1);
  const Vector beta = (Vector(2) << 0.5, -1.0).finished();
  const Vector t = glm_theta_from_beta(beta, 2.0);
  CHECK(t[0] == doctest::Approx(0.25));
  CHECK(t[1] == doctest::Approx(-0.5));
  // Gaussian log density with variance phi: psi = z^T beta (y - y0) / phi.
  const Vector z = (Vector(2) << 1.5, 0.5).finished();
  const Vector y = Vector::Constant(1, 3.0);
  CHECK(m.psi(z, y, t) == doctest::Approx(z.dot(beta) * 3.0 / 2.0));
  CHECK_THROWS_AS(glm_theta_from_beta(beta, 0.0), ArgumentError);
}

TEST_CASE("multinomial logit uses unit class features") {
  const AssociationModel m = make_multinomial_logit(2, 3);
  CHECK(m.dim_y() == 2);
  CHECK(m.param_dim() == 4);
  CHECK(multinomial_class_features(3, 0).isZero(0.0));
  const Vector e2 = multinomial_class_features(3, 2);
  CHECK(e2[1] == 1.0);
  const Vector z = (Vector(2) << 2.0, -1.0).finished();
  // theta is k_x x K; column k holds the class-k slope.
  const Vector t = (Vector(4) << 0.1, 0.2, 0.3, 0.4).finished();
  CHECK(m.psi(z, e2, t) == doctest::Approx(2.0 * 0.2 - 1.0 * 0.4));
}

TEST_CASE("multivariate normal regression log odds ratio") {
  Matrix beta(2, 2);
  beta << 1.0, 0.5, -0.3, 2.0;
  Matrix sigma(2, 2);
  sigma << 2.0, 0.3, 0.3, 1.0;
  const RegressionAssociation ra = make_mv_linear(beta, sigma);
  const Matrix sinv = sigma.inverse();
  const auto logf = [&](const Vector& y, const Vector& x) {
    const Vector r = y - beta.transpose() * x;
    return -0.5 * r.dot(sinv * r);
  };
  const Vector x = (Vector(2) << 0.7, -1.2).finished();
  const Vector y = (Vector(2) << 0.4, 1.1).finished();
  const Vector o = Vector::Zero(2);
  const double want = logf(y, x) + logf(o, o) - logf(y, o) - logf(o, x);
  CHECK(ra.model.psi(x, y, ra.theta) == doctest::Approx(want).epsilon(1e-13));
  Matrix bad = sigma;
  bad(0, 1) = 5.0;
  CHECK_THROWS_AS(make_mv_linear(beta, bad), ArgumentError);
}

TEST_CASE("restricted bilinear submodel") {
  std::mt19937_64 g(6);
  const AssociationModel base = make_log_bilinear(3, 3);
  Matrix a(1, 3), b(2, 3);
  a << 1, 1, 0;
  b << 1, 0, 0, 0, 1, 1;
  const AssociationModel r = restrict_bilinear(base, a, b);
  CHECK(r.kind() == ModelKind::restricted);
  CHECK(r.param_dim() == 2);
  const Vector z = rand_vec(g, 3), v = rand_vec(g, 3), ts = rand_vec(g, 2);
  CHECK(r.psi(z, v, ts) == doctest::Approx(base.psi(z, v, expand_restricted_theta(a, b, ts))).epsilon(1e-14));
}

TEST_CASE("envelope bound holds for log-bilinear psi") {
  std::mt19937_64 g(7);
  const AssociationModel m = make_log_bilinear(2, 2);
  REQUIRE(m.has_envelopes());
  for (int i = 0; i < 100; ++i) {
    const Vector z = 3 * rand_vec(g, 2), v = 3 * rand_vec(g, 2), t = rand_vec(g, 4);
    CHECK(std::abs(m.psi(z, v, t)) <= m.envelope(z, v) * t.norm() + 1e-12);
  }
}
