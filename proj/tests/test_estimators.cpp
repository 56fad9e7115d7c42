#include <doctest.h>

#include <cmath>

#include "confound_ui/error.hpp"
#include "fixtures.hpp"

using namespace confound_ui;

namespace {

double phi_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("estimators against direct evaluation of their displays") {
  const auto a = fixtures::simulated(sim::Design::C, sim::Overlap::HighL1, 800, 0.2, 17);
  const Dataset& d = a->data;
  const FittedModels& m = a->models;
  const Matrix& x = d.x().values();
  const Vector& y = d.y();
  const Vector& z = d.z();
  const Vector m0 = x * m.ols0.coefficients;
  const Vector m1 = x * m.ols1.coefficients;
  const Vector p = (m.treatment_design * m.probit->gamma).unaryExpr(&phi_cdf);
  CHECK((p - m.propensity).cwiseAbs().maxCoeff() <= 1e-14);

  double or_att = 0.0, dr_corr = 0.0, or_ate = 0.0, dr_ate = 0.0;
  const double n = static_cast<double>(d.n()), n1 = static_cast<double>(d.n1());
  for (Index i = 0; i < d.n(); ++i) {
    or_att += z[i] * (y[i] - m0[i]) / n1;
    dr_corr += (1.0 - z[i]) * (y[i] - m0[i]) / (1.0 - p[i]) / n1;
    or_ate += (m1[i] - m0[i]) / n;
    dr_ate += (m1[i] - m0[i] + z[i] * (y[i] - m1[i]) / p[i] -
               (1.0 - z[i]) * (y[i] - m0[i]) / (1.0 - p[i])) / n;
  }
  CHECK(estimate_or_att(d, m) == doctest::Approx(or_att).epsilon(1e-12));
  CHECK(estimate_dr_att(d, m) == doctest::Approx(or_att - dr_corr).epsilon(1e-12));
  CHECK(estimate_or_ate(d, m) == doctest::Approx(or_ate).epsilon(1e-12));
  CHECK(estimate_dr_ate(d, m) == doctest::Approx(dr_ate).epsilon(1e-12));
}

TEST_CASE("noise-free linear outcomes are recovered exactly") {
  const Index n = 60;
  Matrix cov(n, 1);
  Vector z(n), y(n);
  for (Index i = 0; i < n; ++i) {
    cov(i, 0) = std::sin(static_cast<double>(i));
    z[i] = (i % 3 == 0 || cov(i, 0) > 0.5) ? 1.0 : 0.0;
    y[i] = 1.0 + 2.0 * cov(i, 0) + 3.0 * z[i];
  }
  Dataset d(y, z, DesignMatrix::with_intercept(cov));
  const FittedModels m = fit_models(d);
  CHECK(estimate_or_att(d, m) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(estimate_or_ate(d, m) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(estimate_dr_att(d, m) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(estimate_dr_ate(d, m) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("dataset and overlap validation") {
  Matrix cov(4, 1);
  cov << 1, 2, 3, 4;
  Vector y(4), z(4);
  y << 1, 2, 3, 4;
  z << 0, 1, 0, 2;
  CHECK_THROWS_AS(Dataset(y, z, DesignMatrix::with_intercept(cov)), InputError);
  z << 0, 1, 0, 1;
  CHECK_THROWS_AS(Dataset(y, z, DesignMatrix::with_intercept(cov)), DegenerateTreatmentError);
  CHECK_THROWS_AS(Dataset(y.head(3), z, DesignMatrix::with_intercept(cov)), InputError);

  // Clipping keeps every propensity inside [eps, 1 - eps].
  const auto a = fixtures::simulated(sim::Design::A, sim::Overlap::HighL1, 500, 0.0, 3);
  FitOptions opts;
  opts.clip_propensity = 0.2;
  const FittedModels clipped = fit_models(a->data, opts);
  CHECK(clipped.propensity.minCoeff() >= 0.2);
  CHECK(clipped.propensity.maxCoeff() <= 0.8);
  CHECK(clipped.clipped_rows > 0);
}

TEST_CASE("treatment design may be richer than the outcome design") {
  const auto a = fixtures::simulated(sim::Design::A, sim::Overlap::LowL1, 400, 0.0, 8);
  const Matrix& x = a->data.x().values();
  Matrix rich(x.rows(), 3);
  rich << x, x.col(1).array().square().matrix();
  const FittedModels m = fit_models(a->data, DesignMatrix(rich));
  CHECK(m.probit->gamma.size() == 3);
  CHECK(m.ols0.coefficients.size() == 2);
  CHECK(std::isfinite(estimate_dr_att(a->data, m)));
}
