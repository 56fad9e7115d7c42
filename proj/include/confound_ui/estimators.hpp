#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include "confound_ui/stat_core.hpp"

namespace confound_ui {

enum class Estimand { ATT, ATE };
enum class Estimator { OR, DR };

std::string_view to_string(Estimand e) noexcept;
std::string_view to_string(Estimator e) noexcept;

// Observed sample: outcome, 0/1 treatment and outcome design.
class Dataset {
 public:
  // Throws InputError on length mismatch, non-binary treatment or non-finite
  // outcome, and DegenerateTreatmentError when either arm has fewer than
  // cols(X) + 1 rows.
  Dataset(Vector y, Vector z, DesignMatrix x);

  const Vector& y() const noexcept { return y_; }
  const Vector& z() const noexcept { return z_; }
  const DesignMatrix& x() const noexcept { return x_; }
  Index n() const noexcept { return y_.size(); }
  Index n1() const noexcept { return n1_; }
  Index n0() const noexcept { return n() - n1_; }

 private:
  Vector y_;
  Vector z_;
  DesignMatrix x_;
  Index n1_ = 0;
};

struct FitOptions {
  // Clip fitted propensities to [eps, 1 - eps]; unset means no clipping.
  std::optional<double> clip_propensity;
};

struct FittedModels {
  OlsFit ols0;  // controls only
  OlsFit ols1;  // treated only
  std::optional<ProbitFit> probit;
  Matrix treatment_design;  // design the probit was fit on
  Vector propensity;        // probit propensity after optional clipping
  std::optional<double> clip_propensity;
  Index clipped_rows = 0;
};

// Fits both arm regressions on `data.x()` and the probit on
// `treatment_design`, which must be row-aligned with the data and may carry a
// richer basis than the outcome design.
FittedModels fit_models(const Dataset& data, const DesignMatrix& treatment_design,
                        const FitOptions& options = {});
// Same design for outcome and treatment models.
FittedModels fit_models(const Dataset& data, const FitOptions& options = {});

// Everything an estimate needs to be re-examined later (bias, intervals).
struct Analysis {
  Dataset data;
  FittedModels models;
};

struct EffectEstimate {
  Estimand estimand = Estimand::ATE;
  Estimator estimator = Estimator::OR;
  double value = 0.0;
  double std_error = 0.0;
  std::shared_ptr<const Analysis> source;
};

// Outcome regression, treated average of y - b0'x.
double estimate_or_att(const Dataset& data, const FittedModels& models);
// Outcome regression, sample average of (b1 - b0)'x.
double estimate_or_ate(const Dataset& data, const FittedModels& models);
// Doubly robust ATT. Throws OverlapError when a control row has a propensity
// within 1e-10 of one.
double estimate_dr_att(const Dataset& data, const FittedModels& models);
// Doubly robust ATE (augmented IPW). Overlap is checked on both arms.
double estimate_dr_ate(const Dataset& data, const FittedModels& models);

double point_estimate(const Dataset& data, const FittedModels& models,
                      Estimand estimand, Estimator estimator);

// Per-row fitted values b_j'x_i over the full sample.
Vector arm_predictions(const Dataset& data, const OlsFit& fit);

inline constexpr double kOverlapTolerance = 1e-10;

}  // namespace confound_ui
