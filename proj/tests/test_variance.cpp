#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace confound_ui;

TEST_CASE("sandwich breads match finite-difference Jacobians") {
  const auto a = fixtures::simulated(sim::Design::B, sim::Overlap::HighL1, 600, 0.3, 21);
  const Dataset& d = a->data;
  const FittedModels& m = a->models;

  SUBCASE("OR-ATT") {
    const auto c = oracles::or_att_case(d, m);
    CHECK(c.psi(c.theta).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(oracles::relative_gap(sandwich_parts_or_att(d, m).bread,
                                oracles::fd_bread(c.psi, c.theta)) <= 1e-6);
  }
  SUBCASE("OR-ATE") {
    const auto c = oracles::or_ate_case(d, m);
    CHECK(c.psi(c.theta).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(oracles::relative_gap(sandwich_parts_or_ate(d, m).bread,
                                oracles::fd_bread(c.psi, c.theta)) <= 1e-6);
  }
  SUBCASE("DR-ATT including the probit block") {
    const auto c = oracles::dr_att_case(d, m);
    CHECK(c.psi(c.theta).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(oracles::relative_gap(sandwich_parts_dr_att(d, m).bread,
                                oracles::fd_bread(c.psi, c.theta)) <= 1e-6);
  }
}

TEST_CASE("DR-ATE variance equals a row-wise influence recomputation") {
  const auto a = fixtures::simulated(sim::Design::D, sim::Overlap::LowL1, 700, 0.1, 5);
  CHECK(var_dr_ate(a->data, a->models) ==
        doctest::Approx(oracles::dr_ate_variance(a->data, a->models)).epsilon(1e-10));
  CHECK(std::fabs(dr_ate_influence(a->data, a->models).sum()) <= 1e-8);
}

TEST_CASE("variance summaries") {
  const auto a = fixtures::simulated(sim::Design::A, sim::Overlap::LowL1, 500, 0.0, 2);
  const Dataset& d = a->data;
  const FittedModels& m = a->models;
  for (const auto& key : sim::kEstimators) {
    const VarianceResult v = estimator_variance(d, m, key.estimand, key.estimator);
    CHECK(v.variance > 0.0);
    CHECK(v.condition >= 1.0);
    CHECK_FALSE(v.ill_conditioned);
  }
  // Large-sample and sandwich agree to first order on a well specified design.
  const double s = sandwich_var_or_ate(d, m), l = large_sample_var_or_ate(d, m);
  CHECK(std::fabs(std::sqrt(s) / std::sqrt(l) - 1.0) < 0.15);
  const double s1 = sandwich_var_or_att(d, m), l1 = large_sample_var_or_att(d, m);
  CHECK(std::fabs(std::sqrt(s1) / std::sqrt(l1) - 1.0) < 0.15);
  // The sandwich meat is a sum of outer products.
  const SandwichParts parts = sandwich_parts_or_att(d, m);
  CHECK(parts.meat.isApprox(parts.meat.transpose()));
  CHECK(parts.variance_of_target == doctest::Approx(s1));
}
