#include "confound_ui/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confound_ui/error.hpp"

namespace confound_ui {
namespace {

std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

void check_overlap(const Dataset& data, const FittedModels& models, bool controls,
                   bool treated) {
  const Vector& p = models.propensity;
  for (Index i = 0; i < data.n(); ++i) {
    if (controls && data.z()[i] == 0.0 && p[i] >= 1.0 - kOverlapTolerance) {
      throw OverlapError("control row " + std::to_string(i) + " has propensity " +
                         std::to_string(p[i]) +
                         " (numerically 1); the doubly robust weight 1/(1-p) is "
                         "undefined. Overlap requires Pr(z=0|x) > 0.");
    }
    if (treated && data.z()[i] == 1.0 && p[i] <= kOverlapTolerance) {
      throw OverlapError("treated row " + std::to_string(i) + " has propensity " +
                         std::to_string(p[i]) +
                         " (numerically 0); the doubly robust weight 1/p is "
                         "undefined. Overlap requires Pr(z=1|x) > 0.");
    }
  }
}

const ProbitFit& require_probit(const FittedModels& models) {
  if (!models.probit) throw InputError("doubly robust estimation needs a fitted propensity model");
  return *models.probit;
}

}  // namespace

std::string_view to_string(Estimand e) noexcept { return e == Estimand::ATT ? "ATT" : "ATE"; }
std::string_view to_string(Estimator e) noexcept { return e == Estimator::OR ? "OR" : "DR"; }

Dataset::Dataset(Vector y, Vector z, DesignMatrix x)
    : y_(std::move(y)), z_(std::move(z)), x_(std::move(x)) {
  if (y_.size() != x_.rows() || z_.size() != x_.rows()) {
    throw InputError("dataset: outcome, treatment and design lengths differ (" +
                     std::to_string(y_.size()) + ", " + std::to_string(z_.size()) +
                     ", " + std::to_string(x_.rows()) + ")");
  }
  for (Index i = 0; i < z_.size(); ++i) {
    if (z_[i] != 0.0 && z_[i] != 1.0) {
      throw InputError("dataset: treatment must be 0 or 1 (row " + std::to_string(i) + ")");
    }
    if (!std::isfinite(y_[i])) {
      throw InputError("dataset: outcome is not finite (row " + std::to_string(i) + ")");
    }
    n1_ += z_[i] == 1.0;
  }
  const Index need = x_.cols() + 1;
  if (n1_ < need || n0() < need) {
    throw DegenerateTreatmentError(
        "dataset: each arm needs at least " + std::to_string(need) +
        " rows to fit the outcome model (treated " + std::to_string(n1_) +
        ", controls " + std::to_string(n0()) + ")");
  }
}

FittedModels fit_models(const Dataset& data, const DesignMatrix& treatment_design,
                        const FitOptions& options) {
  if (treatment_design.rows() != data.n()) {
    throw InputError("treatment design has " + std::to_string(treatment_design.rows()) +
                     " rows, data has " + std::to_string(data.n()));
  }
  FittedModels m;
  const Matrix& x = data.x().values();
  m.ols0 = fit_ols(select_rows(x, data.z(), 0.0), select_rows(data.y(), data.z(), 0.0), 0);
  m.ols1 = fit_ols(select_rows(x, data.z(), 1.0), select_rows(data.y(), data.z(), 1.0), 1);
  m.probit = fit_probit(treatment_design, data.z());
  m.treatment_design = treatment_design.values();
  m.propensity = m.probit->propensity;
  if (options.clip_propensity) {
    const double eps = *options.clip_propensity;
    if (!(eps > 0.0 && eps < 0.5)) throw InputError("propensity clip must lie in (0, 0.5)");
    m.clip_propensity = eps;
    for (Index i = 0; i < m.propensity.size(); ++i) {
      const double c = std::clamp(m.propensity[i], eps, 1.0 - eps);
      m.clipped_rows += c != m.propensity[i];
      m.propensity[i] = c;
    }
  }
  return m;
}

FittedModels fit_models(const Dataset& data, const FitOptions& options) {
  return fit_models(data, data.x(), options);
}

Vector arm_predictions(const Dataset& data, const OlsFit& fit) {
  Vector out(data.n());
  kernels::gemv(data.x().view(), span_of(fit.coefficients),
                {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

double estimate_or_att(const Dataset& data, const FittedModels& models) {
  const Vector resid0 = data.y() - arm_predictions(data, models.ols0);
  return kernels::dot(span_of(data.z()), span_of(resid0)) / static_cast<double>(data.n1());
}

double estimate_or_ate(const Dataset& data, const FittedModels& models) {
  const Vector diff = arm_predictions(data, models.ols1) - arm_predictions(data, models.ols0);
  return kernels::sum(span_of(diff)) / static_cast<double>(data.n());
}

double estimate_dr_att(const Dataset& data, const FittedModels& models) {
  require_probit(models);
  check_overlap(data, models, true, false);
  const Vector resid0 = data.y() - arm_predictions(data, models.ols0);
  Vector w(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    w[i] = data.z()[i] == 0.0 ? 1.0 / (1.0 - models.propensity[i]) : 0.0;
  }
  const double correction = kernels::dot(span_of(w), span_of(resid0)) /
                            static_cast<double>(data.n1());
  return estimate_or_att(data, models) - correction;
}

double estimate_dr_ate(const Dataset& data, const FittedModels& models) {
  require_probit(models);
  check_overlap(data, models, true, true);
  const Vector m0 = arm_predictions(data, models.ols0);
  const Vector m1 = arm_predictions(data, models.ols1);
  Vector contrib(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const double p = models.propensity[i];
    const double aug = data.z()[i] == 1.0 ? (data.y()[i] - m1[i]) / p
                                          : -(data.y()[i] - m0[i]) / (1.0 - p);
    contrib[i] = aug;
  }
  const Vector diff = m1 - m0;
  const double n = static_cast<double>(data.n());
  return kernels::sum(span_of(diff)) / n + kernels::sum(span_of(contrib)) / n;
}

double point_estimate(const Dataset& data, const FittedModels& models, Estimand estimand,
                      Estimator estimator) {
  if (estimand == Estimand::ATT) {
    return estimator == Estimator::OR ? estimate_or_att(data, models)
                                      : estimate_dr_att(data, models);
  }
  return estimator == Estimator::OR ? estimate_or_ate(data, models)
                                    : estimate_dr_ate(data, models);
}

}  // namespace confound_ui
