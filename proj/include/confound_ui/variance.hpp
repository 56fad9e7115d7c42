#pragma once

#include <memory>

#include "confound_ui/estimators.hpp"

namespace confound_ui {

// Stacked M-estimator pieces. The target parameter is always element 0 of
// the stacked parameter vector.
struct SandwichParts {
  Matrix bread;  // A_n = -(1/n) sum dPsi_i/dtheta
  Matrix meat;   // B_n = (1/n) sum Psi_i Psi_i'
  double variance_of_target = 0.0;  // (A^{-1} B A^{-T})_{00} / n
  double condition = 1.0;           // reciprocal-condition estimate of A, inverted
  bool ill_conditioned = false;     // condition > 1e12
};

inline constexpr double kConditionWarning = 1e12;

// theta = (tau1, beta0)
SandwichParts sandwich_parts_or_att(const Dataset& data, const FittedModels& models);
// theta = (tau, beta1, beta0)
SandwichParts sandwich_parts_or_ate(const Dataset& data, const FittedModels& models);
// theta = (tau1, beta0, gamma); gamma lives on the treatment design.
SandwichParts sandwich_parts_dr_att(const Dataset& data, const FittedModels& models);

double sandwich_var_or_att(const Dataset& data, const FittedModels& models);
double sandwich_var_or_ate(const Dataset& data, const FittedModels& models);
double sandwich_var_dr_att(const Dataset& data, const FittedModels& models);

// n^{-2} sum_i I_i^2 with I_i the augmented-IPW row contribution minus the
// estimate.
double var_dr_ate(const Dataset& data, const FittedModels& models);
// Row contributions I_i used by var_dr_ate.
Vector dr_ate_influence(const Dataset& data, const FittedModels& models);

// Closed-form alternatives for the OR estimators; valid under correctly
// specified outcome models.
double large_sample_var_or_att(const Dataset& data, const FittedModels& models);
double large_sample_var_or_ate(const Dataset& data, const FittedModels& models);

enum class VarianceMethod { Sandwich, LargeSample };

struct VarianceResult {
  double variance = 0.0;
  double condition = 1.0;
  bool ill_conditioned = false;
};

// Default method per estimator: sandwich for OR-ATT, OR-ATE and DR-ATT,
// influence form for DR-ATE. LargeSample only changes the OR estimators.
VarianceResult estimator_variance(const Dataset& data, const FittedModels& models,
                                  Estimand estimand, Estimator estimator,
                                  VarianceMethod method = VarianceMethod::Sandwich);

EffectEstimate estimate_effect(std::shared_ptr<const Analysis> analysis, Estimand estimand,
                               Estimator estimator,
                               VarianceMethod method = VarianceMethod::Sandwich);

}  // namespace confound_ui
