#include <doctest.h>

#include <cmath>
#include <random>

#include "confound_ui/error.hpp"
#include "confound_ui/stat_core.hpp"
#include "oracles.hpp"

using namespace confound_ui;

TEST_CASE("normal distribution values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-14));
  CHECK(normal_sf(8.0) == doctest::Approx(6.22096057427174e-16).epsilon(1e-12));
  CHECK(normal_log_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.5), DomainError);
  for (double p : {1e-12, 0.01, 0.3, 0.77, 0.999999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
  }
}

TEST_CASE("inverse mills ratio") {
  // phi(1.96) / (1 - Phi(1.96)) and phi / Phi
  CHECK(inverse_mills(1.96, Arm::Treated) == doctest::Approx(0.05993930068729001).epsilon(1e-12));
  CHECK(inverse_mills(1.96, Arm::Control) == doctest::Approx(2.3378346051512184).epsilon(1e-12));
  CHECK(inverse_mills(0.0, Arm::Control) == doctest::Approx(0.7978845608028654).epsilon(1e-15));
  // deep tails stay finite and follow the asymptote t
  CHECK(inverse_mills(-40.0, Arm::Treated) == doctest::Approx(40.024968847210886).epsilon(1e-12));
  CHECK(std::isfinite(inverse_mills(60.0, Arm::Control)));
}

TEST_CASE("inverse mills reflection identity") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double t = u(gen);
    const double a = inverse_mills(t, Arm::Control);
    const double b = inverse_mills(-t, Arm::Treated);
    worst = std::max(worst, std::fabs(a - b) / std::max(1.0, std::fabs(a)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("OLS matches an independent QR oracle") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (Index k : {1, 3, 6}) {
    const Index n = 200;
    Matrix x(n, k);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (Index j = 1; j < k; ++j) x(i, j) = nd(gen) * static_cast<double>(j);
    }
    Vector y(n);
    for (Index i = 0; i < n; ++i) y[i] = 2.0 + x.row(i).sum() + nd(gen);
    const OlsFit fit = fit_ols(x, y);
    const Vector oracle = oracles::gram_schmidt_ols(x, y);
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() <= 1e-9);
    const Vector resid = y - x * oracle;
    CHECK(fit.residual_variance ==
          doctest::Approx(resid.squaredNorm() / static_cast<double>(n - k)).epsilon(1e-10));
    CHECK((fit.gram_inverse - (x.transpose() * x).inverse()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("OLS edge cases") {
  Matrix x(3, 3);
  x << 1, 0, 2, 1, 1, 4, 1, 2, 6;  // third column = 2 * first + 2 * second
  Vector y(3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(fit_ols(x, y), SingularityError);

  Matrix sq(2, 2);
  sq << 1, 0, 1, 1;
  Vector y2(2);
  y2 << 3, 5;
  const OlsFit exact = fit_ols(sq, y2);
  CHECK(exact.residual_variance == 0.0);
  CHECK(exact.coefficients[1] == doctest::Approx(2.0));
}

TEST_CASE("probit intercept-only estimate is the normal quantile of the share") {
  const Index n = 1000;
  Vector z = Vector::Zero(n);
  for (Index i = 0; i < 700; ++i) z[i] = 1.0;
  const ProbitFit fit = fit_probit(DesignMatrix(Matrix::Ones(n, 1)), z);
  CHECK(fit.converged);
  CHECK_FALSE(fit.separation);
  CHECK(fit.gamma[0] == doctest::Approx(0.5244005127080407).epsilon(1e-9));
  CHECK(fit.max_abs_score <= 1e-8);
}

TEST_CASE("probit score vanishes at the estimate and separation is flagged") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  const Index n = 500;
  Matrix x(n, 2);
  Vector z(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = nd(gen);
    z[i] = 0.4 * x(i, 1) - 0.1 + nd(gen) > 0.0 ? 1.0 : 0.0;
  }
  const ProbitFit fit = fit_probit(DesignMatrix(x), z);
  CHECK(fit.converged);
  CHECK(probit_score(x, z, fit.gamma).cwiseAbs().maxCoeff() <= 1e-6);

  Vector sep(n);
  for (Index i = 0; i < n; ++i) sep[i] = x(i, 1) > 0.0 ? 1.0 : 0.0;
  const ProbitFit bad = fit_probit(DesignMatrix(x), sep);
  CHECK(bad.separation);
  CHECK_FALSE(bad.converged);

  CHECK_THROWS_AS(fit_probit(DesignMatrix(x), Vector::Zero(n)), DegenerateTreatmentError);
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(RngSeed{42, 0}), b(RngSeed{42, 0}), c(RngSeed{42, 1});
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.normal();
    CHECK(va == b.normal());
    differs = differs || va != c.normal();
  }
  CHECK(differs);
  Rng u(RngSeed{1, 2});
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("multivariate normal sampling") {
  Matrix cov(3, 3);
  cov << 1.0, 0.3, 0.3, 0.3, 1.0, 0.0, 0.3, 0.0, 1.0;
  const Matrix f = psd_factor(cov);
  CHECK(((f * f.transpose()) - cov).cwiseAbs().maxCoeff() <= 1e-14);

  const Index n = 200000;
  const Matrix draws = sample_mvn(Vector::Zero(3), cov, RngSeed{3, 0}, n);
  const Matrix centered = draws.rowwise() - draws.colwise().mean();
  const Matrix emp = centered.transpose() * centered / static_cast<double>(n - 1);
  CHECK((emp - cov).cwiseAbs().maxCoeff() <= 0.01);

  // singular but PSD: perfectly correlated pair
  Matrix sing(2, 2);
  sing << 1.0, 1.0, 1.0, 1.0;
  const Matrix d2 = sample_mvn(Vector::Zero(2), sing, RngSeed{3, 1}, 10);
  CHECK((d2.col(0) - d2.col(1)).cwiseAbs().maxCoeff() <= 1e-12);

  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(psd_factor(bad), DecompositionError);
}
