#include "confound_ui/variance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confound_ui/error.hpp"

namespace confound_ui {
namespace {

std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

kernels::ColMajorView view_of(const Matrix& x) {
  return {x.data(), static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols()),
          static_cast<std::size_t>(x.outerStride())};
}

// sum_i w_i x_i x_i'
Matrix gram(const Matrix& x, const Vector& w) {
  Matrix out(x.cols(), x.cols());
  kernels::weighted_gram(view_of(x), span_of(w),
                         {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

// sum_i w_i x_i
Vector weighted_colsum(const Matrix& x, const Vector& w) {
  Vector out(x.cols());
  kernels::gemv_t(view_of(x), span_of(w), {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

// B_n = (1/n) Psi' Psi with Psi stored n x m.
Matrix meat_of(const Matrix& psi) {
  const Index n = psi.rows();
  const Vector ones = Vector::Ones(n);
  return gram(psi, ones) / static_cast<double>(n);
}

SandwichParts finish(Matrix bread, Matrix meat, Index n) {
  SandwichParts parts;
  parts.bread = std::move(bread);
  parts.meat = std::move(meat);
  Eigen::PartialPivLU<Matrix> lu(parts.bread);
  const double rcond = lu.rcond();
  if (!(rcond > 0.0) || !std::isfinite(rcond)) {
    throw SingularityError("sandwich bread matrix is singular");
  }
  parts.condition = 1.0 / rcond;
  parts.ill_conditioned = parts.condition > kConditionWarning;
  const Matrix inv = lu.inverse();
  if (!inv.allFinite()) throw SingularityError("sandwich bread matrix is singular");
  const Matrix v = inv * parts.meat * inv.transpose();
  parts.variance_of_target = std::max(0.0, v(0, 0)) / static_cast<double>(n);
  return parts;
}

const ProbitFit& require_probit(const FittedModels& models) {
  if (!models.probit) throw InputError("doubly robust variance needs a fitted propensity model");
  return *models.probit;
}

void check_overlap_rows(const Dataset& data, const Vector& p, bool treated_rows) {
  for (Index i = 0; i < data.n(); ++i) {
    if (data.z()[i] == 0.0 && p[i] >= 1.0 - kOverlapTolerance) {
      throw OverlapError("control row " + std::to_string(i) +
                         " has propensity numerically equal to 1");
    }
    if (treated_rows && data.z()[i] == 1.0 && p[i] <= kOverlapTolerance) {
      throw OverlapError("treated row " + std::to_string(i) +
                         " has propensity numerically equal to 0");
    }
  }
}

// Sample covariance (divisor rows - 1) of the rows of x.
Matrix sample_covariance(const Matrix& x) {
  const Vector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace

SandwichParts sandwich_parts_or_att(const Dataset& data, const FittedModels& models) {
  const Matrix& x = data.x().values();
  const Index n = data.n();
  const Index k = x.cols();
  const Vector& z = data.z();
  const Vector ctrl = Vector::Ones(n) - z;
  const Vector r0 = data.y() - arm_predictions(data, models.ols0);
  const double tau = estimate_or_att(data, models);

  // Psi_i = [ z (r0 - tau) ; (1 - z) r0 x_i ]
  Matrix psi(n, 1 + k);
  for (Index i = 0; i < n; ++i) {
    psi(i, 0) = z[i] * (r0[i] - tau);
    const double w = ctrl[i] * r0[i];
    for (Index c = 0; c < k; ++c) psi(i, 1 + c) = w * x(i, c);
  }

  // A_n = (1/n) sum [ z , z x' ; 0 , (1 - z) x x' ]
  Matrix a = Matrix::Zero(1 + k, 1 + k);
  a(0, 0) = kernels::sum(span_of(z));
  a.block(0, 1, 1, k) = weighted_colsum(x, z).transpose();
  a.block(1, 1, k, k) = gram(x, ctrl);
  a /= static_cast<double>(n);
  return finish(std::move(a), meat_of(psi), n);
}

SandwichParts sandwich_parts_or_ate(const Dataset& data, const FittedModels& models) {
  const Matrix& x = data.x().values();
  const Index n = data.n();
  const Index k = x.cols();
  const Vector& z = data.z();
  const Vector ctrl = Vector::Ones(n) - z;
  const Vector m0 = arm_predictions(data, models.ols0);
  const Vector m1 = arm_predictions(data, models.ols1);
  const Vector r0 = data.y() - m0;
  const Vector r1 = data.y() - m1;
  const double tau = estimate_or_ate(data, models);

  // Psi_i = [ (b1 - b0)'x - tau ; z r1 x ; (1 - z) r0 x ]
  Matrix psi(n, 1 + 2 * k);
  for (Index i = 0; i < n; ++i) {
    psi(i, 0) = (m1[i] - m0[i]) - tau;
    const double w1 = z[i] * r1[i];
    const double w0 = ctrl[i] * r0[i];
    for (Index c = 0; c < k; ++c) {
      psi(i, 1 + c) = w1 * x(i, c);
      psi(i, 1 + k + c) = w0 * x(i, c);
    }
  }

  // A_n = (1/n) sum [ 1 , -x' , x' ; 0 , z x x' , 0 ; 0 , 0 , (1 - z) x x' ]
  Matrix a = Matrix::Zero(1 + 2 * k, 1 + 2 * k);
  const Vector colsum = weighted_colsum(x, Vector::Ones(n));
  a(0, 0) = static_cast<double>(n);
  a.block(0, 1, 1, k) = -colsum.transpose();
  a.block(0, 1 + k, 1, k) = colsum.transpose();
  a.block(1, 1, k, k) = gram(x, z);
  a.block(1 + k, 1 + k, k, k) = gram(x, ctrl);
  a /= static_cast<double>(n);
  return finish(std::move(a), meat_of(psi), n);
}

SandwichParts sandwich_parts_dr_att(const Dataset& data, const FittedModels& models) {
  const ProbitFit& probit = require_probit(models);
  const Matrix& x = data.x().values();
  const Matrix& xt = models.treatment_design;
  const Index n = data.n();
  const Index k = x.cols();
  const Index kt = xt.cols();
  const Vector& z = data.z();
  const Vector& p = models.propensity;
  check_overlap_rows(data, p, false);
  const Vector r0 = data.y() - arm_predictions(data, models.ols0);
  const double tau = estimate_dr_att(data, models);

  Matrix psi(n, 1 + k + kt);
  Vector w_beta(n);     // d Psi1 / d beta0 = -w_beta x'
  Vector w_gamma(n);    // d Psi1 / d gamma = -w_gamma x_t'
  Vector w_info(n);     // -d Psi3 / d gamma = w_info x_t x_t'
  for (Index i = 0; i < n; ++i) {
    const double eta = probit.linear_index[i];
    const double ctrl = 1.0 - z[i];
    const double surv = 1.0 - p[i];
    // Psi1 = z r0 - (1 - z) r0 / (1 - p) - z tau
    psi(i, 0) = z[i] * r0[i] - ctrl * r0[i] / surv - z[i] * tau;
    // Psi2 = (1 - z) r0 x
    for (Index c = 0; c < k; ++c) psi(i, 1 + c) = ctrl * r0[i] * x(i, c);
    // Psi3 = q lambda_1(q eta) x_t, the probit score with q = 2z - 1
    const double q = 2.0 * z[i] - 1.0;
    const double lam = inverse_mills(q * eta, Arm::Treated);
    for (Index c = 0; c < kt; ++c) psi(i, 1 + k + c) = q * lam * xt(i, c);

    w_beta[i] = z[i] - ctrl / surv;
    // d/dgamma [1/(1 - Phi(eta))] = phi(eta) / (1 - Phi(eta))^2 x_t; zero on
    // rows whose propensity was clipped.
    const bool clipped = models.clip_propensity && p[i] != probit.propensity[i];
    w_gamma[i] = clipped ? 0.0 : ctrl * r0[i] * normal_pdf(eta) / (surv * surv);
    // d/deta [q lambda_1(q eta)] = -lambda_1(q eta) (lambda_1(q eta) + q eta)
    w_info[i] = lam * (lam + q * eta);
  }

  Matrix a = Matrix::Zero(1 + k + kt, 1 + k + kt);
  a(0, 0) = kernels::sum(span_of(z));
  a.block(0, 1, 1, k) = weighted_colsum(x, w_beta).transpose();
  a.block(0, 1 + k, 1, kt) = weighted_colsum(xt, w_gamma).transpose();
  a.block(1, 1, k, k) = gram(x, Vector::Ones(n) - z);
  a.block(1 + k, 1 + k, kt, kt) = gram(xt, w_info);
  a /= static_cast<double>(n);
  return finish(std::move(a), meat_of(psi), n);
}

double sandwich_var_or_att(const Dataset& data, const FittedModels& models) {
  return sandwich_parts_or_att(data, models).variance_of_target;
}

double sandwich_var_or_ate(const Dataset& data, const FittedModels& models) {
  return sandwich_parts_or_ate(data, models).variance_of_target;
}

double sandwich_var_dr_att(const Dataset& data, const FittedModels& models) {
  return sandwich_parts_dr_att(data, models).variance_of_target;
}

Vector dr_ate_influence(const Dataset& data, const FittedModels& models) {
  require_probit(models);
  check_overlap_rows(data, models.propensity, true);
  const Vector m0 = arm_predictions(data, models.ols0);
  const Vector m1 = arm_predictions(data, models.ols1);
  const double tau = estimate_dr_ate(data, models);
  Vector out(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const double p = models.propensity[i];
    const double z = data.z()[i];
    const double y = data.y()[i];
    out[i] = (m1[i] - m0[i]) + z * (y - m1[i]) / p - (1.0 - z) * (y - m0[i]) / (1.0 - p) - tau;
  }
  return out;
}

double var_dr_ate(const Dataset& data, const FittedModels& models) {
  const Vector inf = dr_ate_influence(data, models);
  const double n = static_cast<double>(data.n());
  return kernels::dot(span_of(inf), span_of(inf)) / (n * n);
}

double large_sample_var_or_att(const Dataset& data, const FittedModels& models) {
  const double n1 = static_cast<double>(data.n1());
  const Vector& e1 = models.ols1.residuals;
  const double s1 = kernels::dot(span_of(e1), span_of(e1)) / (n1 - 1.0);
  const Vector d = models.ols1.coefficients - models.ols0.coefficients;
  const Matrix cov1 = sample_covariance(select_rows(data.x().values(), data.z(), 1.0));
  return (2.0 * s1 + d.dot(cov1 * d)) / n1;
}

double large_sample_var_or_ate(const Dataset& data, const FittedModels& models) {
  const double n = static_cast<double>(data.n());
  const auto arm_var = [](const OlsFit& f) {
    const double rows = static_cast<double>(f.rows);
    return f.residuals.squaredNorm() / (rows - 1.0);
  };
  const Vector xbar = data.x().values().colwise().mean();
  // Cov(b_j | X) = s_j^2 (X_j'X_j)^{-1}
  const Matrix cov_b = arm_var(models.ols1) * models.ols1.gram_inverse +
                       arm_var(models.ols0) * models.ols0.gram_inverse;
  const Vector d = models.ols1.coefficients - models.ols0.coefficients;
  const Matrix cov = sample_covariance(data.x().values());
  return xbar.dot(cov_b * xbar) + d.dot(cov * d) / n;
}

VarianceResult estimator_variance(const Dataset& data, const FittedModels& models,
                                  Estimand estimand, Estimator estimator,
                                  VarianceMethod method) {
  VarianceResult out;
  if (estimator == Estimator::OR && method == VarianceMethod::LargeSample) {
    out.variance = estimand == Estimand::ATT ? large_sample_var_or_att(data, models)
                                             : large_sample_var_or_ate(data, models);
    return out;
  }
  if (estimator == Estimator::DR && estimand == Estimand::ATE) {
    out.variance = var_dr_ate(data, models);
    return out;
  }
  SandwichParts parts;
  if (estimator == Estimator::OR) {
    parts = estimand == Estimand::ATT ? sandwich_parts_or_att(data, models)
                                      : sandwich_parts_or_ate(data, models);
  } else {
    parts = sandwich_parts_dr_att(data, models);
  }
  out.variance = parts.variance_of_target;
  out.condition = parts.condition;
  out.ill_conditioned = parts.ill_conditioned;
  return out;
}

EffectEstimate estimate_effect(std::shared_ptr<const Analysis> analysis, Estimand estimand,
                               Estimator estimator, VarianceMethod method) {
  EffectEstimate e;
  e.estimand = estimand;
  e.estimator = estimator;
  e.value = point_estimate(analysis->data, analysis->models, estimand, estimator);
  e.std_error = std::sqrt(
      estimator_variance(analysis->data, analysis->models, estimand, estimator, method).variance);
  e.source = std::move(analysis);
  return e;
}

}  // namespace confound_ui
