#include <cmath>
#include <string>

#include "confound_ui/error.hpp"
#include "confound_ui/stat_core.hpp"

namespace confound_ui {
namespace {

kernels::ColMajorView view_of(const Matrix& x) {
  return {x.data(), static_cast<std::size_t>(x.rows()),
          static_cast<std::size_t>(x.cols()),
          static_cast<std::size_t>(x.outerStride())};
}

std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::span<double> span_of(Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Per-row pieces of the probit log-likelihood at linear index eta. With
// q = 2z - 1 and t = q * eta, the row contributes log Phi(t), its derivative
// with respect to eta is q * lambda_1(t), and the negative second derivative
// is lambda_1(t) * (lambda_1(t) + t) > 0.
struct RowTerms {
  Vector score_weight;
  Vector hessian_weight;
  double log_likelihood = 0.0;
};

RowTerms row_terms(const Vector& eta, const Vector& z, bool with_hessian) {
  const Index n = eta.size();
  RowTerms out;
  out.score_weight.resize(n);
  if (with_hessian) out.hessian_weight.resize(n);
  Vector ll(n);
  for (Index i = 0; i < n; ++i) {
    const double q = 2.0 * z[i] - 1.0;
    const double t = q * eta[i];
    const double lam = inverse_mills(t, Arm::Treated);
    out.score_weight[i] = q * lam;
    if (with_hessian) out.hessian_weight[i] = lam * (lam + t);
    ll[i] = normal_log_cdf(t);
  }
  out.log_likelihood = kernels::sum(span_of(ll));
  return out;
}

Vector linear_index(const Matrix& x, const Vector& gamma) {
  Vector eta(x.rows());
  kernels::gemv(view_of(x), span_of(gamma), span_of(eta));
  return eta;
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Vector probit_score(const Matrix& x, const Vector& z, const Vector& gamma) {
  const RowTerms terms = row_terms(linear_index(x, gamma), z, false);
  Vector score(x.cols());
  kernels::gemv_t(view_of(x), span_of(terms.score_weight), span_of(score));
  return score;
}

ProbitFit fit_probit(const DesignMatrix& design, const Vector& z,
                     const ProbitOptions& options) {
  const Matrix& x = design.values();
  const Index n = x.rows();
  const Index k = x.cols();
  if (z.size() != n) throw InputError("fit_probit: treatment length does not match design rows");
  Index ones = 0;
  for (Index i = 0; i < n; ++i) {
    if (z[i] != 0.0 && z[i] != 1.0) {
      throw InputError("fit_probit: treatment must be 0/1 (row " + std::to_string(i) + ")");
    }
    ones += z[i] == 1.0;
  }
  if (ones == 0 || ones == n) {
    throw DegenerateTreatmentError(
        "fit_probit: treatment has a single class (" + std::to_string(ones) +
        " treated of " + std::to_string(n) + "); the propensity model is not identified");
  }

  ProbitFit fit;
  fit.gamma = Vector::Zero(k);
  Vector eta = Vector::Zero(n);
  RowTerms terms = row_terms(eta, z, true);
  Vector score(k);
  Matrix info(k, k);
  const auto xv = view_of(x);

  for (int it = 1; it <= options.max_iterations; ++it) {
    fit.iterations = it;
    kernels::gemv_t(xv, span_of(terms.score_weight), span_of(score));
    fit.max_abs_score = max_abs(score);
    if (fit.max_abs_score <= options.score_tolerance) {
      fit.converged = true;
      break;
    }
    kernels::weighted_gram(xv, span_of(terms.hessian_weight),
                           {info.data(), static_cast<std::size_t>(k * k)});
    Eigen::LDLT<Matrix> ldlt(info);
    Vector step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      throw SingularityError("fit_probit: information matrix is singular at iteration " +
                             std::to_string(it));
    }

    // Step halving until the log-likelihood does not decrease.
    double scale = 1.0;
    Vector candidate;
    RowTerms next;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      candidate = fit.gamma + scale * step;
      eta = linear_index(x, candidate);
      next = row_terms(eta, z, true);
      if (next.log_likelihood >= terms.log_likelihood - 1e-12 * std::fabs(terms.log_likelihood)) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    const double moved = (candidate - fit.gamma).cwiseAbs().maxCoeff();
    fit.gamma = candidate;
    terms = std::move(next);

    if (max_abs(fit.gamma) > options.divergence_bound) {
      fit.separation = true;
      break;
    }
    // Stall: no measurable progress. Accept only if the score is small.
    if (!accepted || moved <= 1e-14 * (1.0 + max_abs(fit.gamma))) {
      kernels::gemv_t(xv, span_of(terms.score_weight), span_of(score));
      fit.max_abs_score = max_abs(score);
      fit.converged = fit.max_abs_score <= 1e-6;
      break;
    }
  }

  kernels::gemv_t(xv, span_of(terms.score_weight), span_of(score));
  fit.max_abs_score = max_abs(score);
  fit.linear_index = linear_index(x, fit.gamma);
  fit.log_likelihood = terms.log_likelihood;
  fit.propensity.resize(n);
  for (Index i = 0; i < n; ++i) fit.propensity[i] = normal_cdf(fit.linear_index[i]);
  if (fit.converged) {
    for (Index i = 0; i < n; ++i) {
      if (!(fit.propensity[i] > 0.0 && fit.propensity[i] < 1.0)) {
        fit.converged = false;
        fit.separation = true;
        break;
      }
    }
  }
  return fit;
}

}  // namespace confound_ui
