#include "confound_ui/bias_ui.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "confound_ui/error.hpp"

namespace confound_ui {
namespace {

std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

struct ArmPieces {
  Matrix x;        // arm rows of the outcome design
  Vector g;        // linear index on arm rows
  Vector lambda;   // lambda_j(g) on arm rows
  Vector proj;     // (X_j'X_j)^{-1} X_j' lambda_j
  double g_lambda = 0.0;
  double quad = 0.0;  // lambda' H lambda
};

const ProbitFit& require_probit(const FittedModels& models) {
  if (!models.probit) throw InputError("confounding bias needs a fitted propensity model");
  return *models.probit;
}

ArmPieces arm_pieces(const Dataset& data, const FittedModels& models, Arm arm) {
  const ProbitFit& probit = require_probit(models);
  const double label = arm == Arm::Treated ? 1.0 : 0.0;
  const OlsFit& ols = arm == Arm::Treated ? models.ols1 : models.ols0;
  ArmPieces p;
  p.x = select_rows(data.x().values(), data.z(), label);
  p.g = select_rows(probit.linear_index, data.z(), label);
  p.lambda.resize(p.g.size());
  for (Index i = 0; i < p.g.size(); ++i) p.lambda[i] = inverse_mills(p.g[i], arm);
  Vector xl(p.x.cols());
  kernels::gemv_t({p.x.data(), static_cast<std::size_t>(p.x.rows()),
                   static_cast<std::size_t>(p.x.cols()), static_cast<std::size_t>(p.x.rows())},
                  span_of(p.lambda), {xl.data(), static_cast<std::size_t>(xl.size())});
  p.proj = ols.gram_inverse * xl;
  p.g_lambda = kernels::dot(span_of(p.g), span_of(p.lambda));
  p.quad = xl.dot(p.proj);
  return p;
}

double mean_of(const Vector& v) {
  return kernels::sum(span_of(v)) / static_cast<double>(v.size());
}

std::string rho_text(double rho) {
  std::ostringstream os;
  os.precision(6);
  os << rho;
  return os.str();
}

double critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  return normal_quantile(1.0 - alpha / 2.0);
}

struct AxisRange {
  double min = 0.0;
  double max = 0.0;
};

AxisRange axis_range(const BiasModel& model, Arm arm, const RhoInterval& rho, int grid) {
  if (!model.uses_arm(arm)) return {};
  AxisRange r;
  bool first = true;
  for (double v : rho_grid(rho, grid)) {
    const double t = model.arm_term(arm, v);
    if (first) {
      r.min = r.max = t;
      first = false;
    } else {
      r.min = std::min(r.min, t);
      r.max = std::max(r.max, t);
    }
  }
  return r;
}

const Analysis& source_of(const EffectEstimate& e) {
  if (!e.source) throw InputError("estimate carries no fitted models");
  return *e.source;
}

}  // namespace

RhoInterval::RhoInterval(double lo, double hi) : low(lo), high(hi) {
  if (!(lo >= -1.0 && hi <= 1.0 && lo <= hi)) {
    throw DomainError("rho interval [" + rho_text(lo) + ", " + rho_text(hi) +
                      "] must satisfy -1 <= low <= high <= 1");
  }
}

BiasModel::BiasModel(const Dataset& data, const FittedModels& models, Estimand estimand,
                     Estimator estimator)
    : estimand_(estimand), estimator_(estimator) {
  const double cols = static_cast<double>(data.x().cols());
  for (Arm arm : {Arm::Control, Arm::Treated}) {
    if (!uses_arm(arm)) continue;
    const int j = idx(arm);
    const ArmPieces p = arm_pieces(data, models, arm);
    const OlsFit& ols = arm == Arm::Treated ? models.ols1 : models.ols0;
    s2_[j] = ols.residual_variance;
    const double m = static_cast<double>(p.g.size()) - cols;
    const double signed_gl = arm == Arm::Treated ? p.g_lambda : -p.g_lambda;
    shrink_[j] = m > 0.0 ? (signed_gl + p.quad) / m : 0.0;
  }

  const ProbitFit& probit = require_probit(models);
  const double n = static_cast<double>(data.n());
  const Vector xbar = data.x().values().colwise().mean();
  if (estimator == Estimator::OR) {
    const ArmPieces c = arm_pieces(data, models, Arm::Control);
    if (estimand == Estimand::ATT) {
      const Matrix x1 = select_rows(data.x().values(), data.z(), 1.0);
      const Vector xbar1 = x1.colwise().mean();
      const Vector g1 = select_rows(probit.linear_index, data.z(), 1.0);
      Vector l1(g1.size());
      for (Index i = 0; i < g1.size(); ++i) l1[i] = inverse_mills(g1[i], Arm::Treated);
      k_[0] = mean_of(l1) + c.proj.dot(xbar1);
    } else {
      const ArmPieces t = arm_pieces(data, models, Arm::Treated);
      k_[0] = xbar.dot(c.proj);
      k_[1] = xbar.dot(t.proj);
    }
  } else {
    const Vector& g = probit.linear_index;
    Vector l0(g.size()), l1(g.size());
    for (Index i = 0; i < g.size(); ++i) {
      l0[i] = inverse_mills(g[i], Arm::Control);
      l1[i] = inverse_mills(g[i], Arm::Treated);
    }
    if (estimand == Estimand::ATT) {
      k_[0] = mean_of(l0) / (static_cast<double>(data.n1()) / n);
    } else {
      k_[0] = mean_of(l0);
      k_[1] = mean_of(l1);
    }
  }
}

double BiasModel::sigma(Arm arm, double rho) const {
  const int j = idx(arm);
  const double denom = 1.0 - rho * rho * shrink_[j];
  if (!(denom > 0.0)) {
    throw InfeasibleRhoError("rho" + std::to_string(j) + " = " + rho_text(rho) +
                                 " is incompatible with the data: the corrected residual "
                                 "variance would be non-positive (|rho" +
                                 std::to_string(j) + "| must stay below " +
                                 rho_text(feasibility_limit(arm)) + ")",
                             rho, j);
  }
  return std::sqrt(s2_[j] / denom);
}

double BiasModel::arm_term(Arm arm, double rho) const {
  if (!uses_arm(arm)) return 0.0;
  return rho * sigma(arm, rho) * k_[idx(arm)];
}

double BiasModel::bias(double rho0, double rho1) const {
  return arm_term(Arm::Control, rho0) + arm_term(Arm::Treated, rho1);
}

double BiasModel::feasibility_limit(Arm arm) const noexcept {
  const double s = shrink_[idx(arm)];
  if (s <= 1.0) return 1.0;
  return 1.0 / std::sqrt(s);
}

double sigma_corrected(double rho, const Dataset& data, const FittedModels& models, Arm arm) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("rho must lie in [-1, 1]");
  const Estimand e = arm == Arm::Treated ? Estimand::ATE : Estimand::ATT;
  return BiasModel(data, models, e, Estimator::DR).sigma(arm, rho);
}

double bias_c_or_att(const Dataset& data, const FittedModels& models, double rho0) {
  return BiasModel(data, models, Estimand::ATT, Estimator::OR).bias(rho0, 0.0);
}

double bias_c_or_ate(const Dataset& data, const FittedModels& models, double rho0, double rho1) {
  return BiasModel(data, models, Estimand::ATE, Estimator::OR).bias(rho0, rho1);
}

double bias_c_dr_att(const Dataset& data, const FittedModels& models, double rho0) {
  return BiasModel(data, models, Estimand::ATT, Estimator::DR).bias(rho0, 0.0);
}

double bias_c_dr_ate(const Dataset& data, const FittedModels& models, double rho0, double rho1) {
  return BiasModel(data, models, Estimand::ATE, Estimator::DR).bias(rho0, rho1);
}

std::vector<double> rho_grid(const RhoInterval& rho, int grid) {
  if (grid < 2) throw DomainError("rho grid needs at least 2 points");
  if (rho.degenerate()) return {rho.low};
  std::vector<double> out(static_cast<std::size_t>(grid));
  const double step = rho.high - rho.low;
  for (int k = 0; k < grid; ++k) {
    out[static_cast<std::size_t>(k)] =
        rho.low + step * static_cast<double>(k) / static_cast<double>(grid - 1);
  }
  out.back() = rho.high;
  return out;
}

// The bias separates across rho0 and rho1, so the extremes over the product
// grid are sums of per-axis extremes. Rounding is monotone, so this is exactly
// what a full scan of the product grid would return.
Interval identification_interval(const EffectEstimate& estimate, const RhoPair& rho, int grid) {
  const Analysis& a = source_of(estimate);
  const BiasModel model(a.data, a.models, estimate.estimand, estimate.estimator);
  const AxisRange r0 = axis_range(model, Arm::Control, rho.rho0, grid);
  const AxisRange r1 = axis_range(model, Arm::Treated, rho.rho1, grid);
  return {estimate.value - (r0.max + r1.max), estimate.value - (r0.min + r1.min)};
}

UncertaintyInterval uncertainty_interval(const EffectEstimate& estimate, const RhoPair& rho,
                                         double alpha, int grid) {
  const double c = critical_value(alpha);
  UncertaintyInterval ui;
  ui.identification = identification_interval(estimate, rho, grid);
  ui.lower = ui.identification.lower - c * estimate.std_error;
  ui.upper = ui.identification.upper + c * estimate.std_error;
  ui.alpha = alpha;
  ui.rho = rho;
  ui.estimand = estimate.estimand;
  ui.estimator = estimate.estimator;
  return ui;
}

Interval confidence_interval(const EffectEstimate& estimate, double alpha) {
  const double c = critical_value(alpha);
  return {estimate.value - c * estimate.std_error, estimate.value + c * estimate.std_error};
}

RhoInterval sensitivity_interval(double r, SensitivityMode mode) {
  return mode == SensitivityMode::Symmetric ? RhoInterval(-r, r) : RhoInterval(0.0, r);
}

SensitivityResult sensitivity_threshold(const EffectEstimate& estimate, double alpha,
                                        SensitivityMode mode, double tol, int grid) {
  if (!(tol > 0.0)) throw DomainError("sensitivity tolerance must be positive");
  const Analysis& a = source_of(estimate);
  const BiasModel model(a.data, a.models, estimate.estimand, estimate.estimator);

  SensitivityResult out;
  double limit = model.feasibility_limit(Arm::Control);
  if (model.uses_arm(Arm::Treated)) limit = std::min(limit, model.feasibility_limit(Arm::Treated));
  out.feasibility_limit = limit;
  // Stay strictly inside the feasible region.
  const double r_max = limit < 1.0 ? limit * (1.0 - 1e-9) : 1.0;

  const auto ui_at = [&](double r) {
    const RhoInterval iv = sensitivity_interval(r, mode);
    return uncertainty_interval(estimate, RhoPair{iv, iv}, alpha, grid);
  };
  const auto covers = [](const UncertaintyInterval& ui) { return ui.contains(0.0); };

  out.ui = ui_at(0.0);
  if (covers(out.ui)) {
    out.ci_covers_zero = true;
    return out;
  }
  UncertaintyInterval hi_ui = ui_at(r_max);
  if (!covers(hi_ui)) {
    out.reached = false;
    out.threshold = r_max;
    out.ui = hi_ui;
    return out;
  }
  double lo = 0.0;
  double hi = r_max;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    UncertaintyInterval ui = ui_at(mid);
    ++out.iterations;
    if (covers(ui)) {
      hi = mid;
      hi_ui = std::move(ui);
    } else {
      lo = mid;
    }
  }
  out.threshold = hi;
  out.ui = hi_ui;
  return out;
}

}  // namespace confound_ui
