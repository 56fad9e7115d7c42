#include <doctest.h>

#include <cmath>

#include "confound_ui/error.hpp"
#include "confound_ui/kernels.hpp"
#include "confound_ui/simulation.hpp"

using namespace confound_ui;
using namespace confound_ui::sim;

TEST_CASE("outcome functions") {
  CHECK(h0(0.0) == 1.5);
  CHECK(h1(0.0) == 0.0);
  CHECK(h0(2.5) == doctest::Approx(3.5));
  CHECK(design_covariates(Design::A) == 1);
  CHECK(design_covariates(Design::D) == 5);
  CHECK(design_gamma(Design::C, Overlap::LowL1).size() == 6);
  CHECK(parse_design("c") == Design::C);
  CHECK(parse_overlap("high_L1") == Overlap::HighL1);
  CHECK_THROWS_AS(parse_design("E"), InputError);
}

TEST_CASE("design validation") {
  CHECK_THROWS_AS((SimulationDesign{Design::A, Overlap::LowL1, 10, 0.0, 0.0}.validate()), DomainError);
  CHECK_THROWS_AS((SimulationDesign{Design::A, Overlap::LowL1, 100, 1.2, 0.0}.validate()), DomainError);
  CHECK_NOTHROW((SimulationDesign{Design::A, Overlap::LowL1, 100, 1.0, 1.0}.validate()));
}

TEST_CASE("generated samples are reproducible and well formed") {
  const SimulationDesign des{Design::D, Overlap::HighL1, 300, 0.3, 0.3};
  const SimulatedData a = generate(des, RngSeed{5, 2});
  const SimulatedData b = generate(des, RngSeed{5, 2});
  const SimulatedData c = generate(des, RngSeed{5, 3});
  CHECK(a.data.y() == b.data.y());
  CHECK(a.data.z() == b.data.z());
  CHECK(a.data.y() != c.data.y());
  CHECK(a.data.x().values().cols() == 6);
  CHECK(a.true_propensity.minCoeff() > 0.0);
  for (Index i = 0; i < a.data.n(); ++i) {
    const double* row = nullptr;
    Vector x = a.data.x().values().row(i).tail(5).transpose();
    row = x.data();
    CHECK(a.f0[i] == f0(Design::D, row));
  }
}

TEST_CASE("histogram breaks follow R's pretty") {
  const auto br = sturges_breaks(0.03, 0.97, 128);
  REQUIRE(br.size() == 11);
  for (std::size_t i = 0; i < br.size(); ++i) CHECK(br[i] == doctest::Approx(0.1 * i));
  const auto br5 = sturges_breaks(0.0, 1.0, 16);
  CHECK(br5.size() == 6);
  CHECK(br5[1] == doctest::Approx(0.2));
}

TEST_CASE("L1 imbalance limits") {
  Vector a(6), b(6);
  a << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  CHECK(l1_imbalance(a, a) == 0.0);
  Vector lo(4), hi(4);
  lo << 0.01, 0.02, 0.03, 0.04;
  hi << 0.96, 0.97, 0.98, 0.99;
  CHECK(l1_imbalance(hi, lo) == doctest::Approx(1.0));
  CHECK_THROWS_AS(l1_imbalance(a, Vector()), InputError);
  b << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  Vector z(12);
  Vector p(12);
  p << a, b;
  z << Vector::Ones(6), Vector::Zero(6);
  CHECK(l1_imbalance_by_arm(p, z) == 0.0);
}

TEST_CASE("population truth against Monte Carlo") {
  for (const Design d : {Design::A, Design::B, Design::C, Design::D}) {
    CAPTURE(to_string(d));
    const SimulationDesign des{d, Overlap::HighL1, 200000, 0.0, 0.0};
    const PopulationTruth t = population_truth(des);
    const SimulatedData s = generate(des, RngSeed{77, 0});
    const Vector diff = s.f1 - s.f0;
    const double n = static_cast<double>(diff.size());
    const double ate = diff.mean();
    const double sd = std::sqrt((diff.array() - ate).square().sum() / (n - 1.0));
    CHECK(std::fabs(ate - t.ate) <= 4.0 * sd / std::sqrt(n));
    double att = 0.0;
    Index n1 = 0;
    for (Index i = 0; i < s.data.n(); ++i) {
      if (s.data.z()[i] == 1.0) {
        att += diff[i];
        ++n1;
      }
    }
    att /= static_cast<double>(n1);
    CHECK(std::fabs(att - t.att) <= 5.0 * sd / std::sqrt(static_cast<double>(n1)));
    CHECK(std::fabs(static_cast<double>(n1) / n - t.treated_fraction) <= 0.005);
  }
}

TEST_CASE("study results do not depend on threads or kernel backend") {
  StudyConfig cfg;
  cfg.design = {Design::B, Overlap::LowL1, 250, 0.3, 0.3};
  cfg.replications = 12;
  cfg.seed = 2024;
  cfg.uis = {{RhoPair{RhoInterval(0.0, 0.4), RhoInterval(0.0, 0.4)}, 0.05, ""}};
  cfg.threads = 1;
  const StudyResult one = run_study(cfg);
  cfg.threads = 3;
  const StudyResult three = run_study(cfg);
  REQUIRE(one.succeeded == three.succeeded);
  for (std::size_t r = 0; r < one.replications.size(); ++r) {
    for (int k = 0; k < 4; ++k) {
      CHECK(one.replications[r].est[k].value == three.replications[r].est[k].value);
      CHECK(one.replications[r].est[k].ui_lower == three.replications[r].est[k].ui_lower);
    }
  }
  CHECK(one.estimators[0].ci_coverage.mean == three.estimators[0].ci_coverage.mean);

  const auto original = kernels::active_backend();
  kernels::set_backend(kernels::Backend::Scalar);
  const StudyResult scalar = run_study(cfg);
  kernels::set_backend(original);
  for (std::size_t r = 0; r < one.replications.size(); ++r) {
    CHECK(one.replications[r].est[3].std_error == scalar.replications[r].est[3].std_error);
  }
  CHECK(one.estimators[0].uis[0].label == "ui_0_0.4");
}

TEST_CASE("interrupted studies keep finished replications") {
  StudyConfig cfg;
  cfg.design = {Design::A, Overlap::LowL1, 100, 0.0, 0.0};
  cfg.replications = 5;
  std::atomic<bool> stop{true};
  cfg.stop = &stop;
  const StudyResult r = run_study(cfg);
  CHECK(r.not_run == 5);
  CHECK(r.succeeded == 0);
  CHECK(std::isnan(r.estimators[0].estimate.mean));
}

TEST_CASE("single replication leaves Monte Carlo errors undefined") {
  StudyConfig cfg;
  cfg.design = {Design::C, Overlap::LowL1, 200, 0.1, 0.1};
  cfg.replications = 1;
  const StudyResult r = run_study(cfg);
  REQUIRE(r.succeeded == 1);
  CHECK(std::isfinite(r.estimators[0].estimate.mean));
  CHECK(std::isnan(r.estimators[0].estimate.mc_se));
}

TEST_CASE("misspecification bias vanishes for linear truth") {
  const SimulatedData s = generate({Design::A, Overlap::LowL1, 500, 0.0, 0.0}, RngSeed{1, 0});
  const FittedModels m = fit_models(s.data);
  const MisspecificationBias bm = bias_m_or(s.data, m, s.f0, s.f1);
  CHECK(std::fabs(bm.att) <= 1e-10);
  CHECK(std::fabs(bm.ate) <= 1e-10);
}
