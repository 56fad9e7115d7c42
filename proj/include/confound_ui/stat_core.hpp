#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "confound_ui/kernels.hpp"

namespace confound_ui {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Arm : int { Control = 0, Treated = 1 };

// ---------------------------------------------------------------------------
// Standard normal distribution

double normal_pdf(double t) noexcept;
double normal_cdf(double t) noexcept;
// Upper tail 1 - Phi(t), accurate for large t.
double normal_sf(double t) noexcept;
// log Phi(t), finite for every finite t.
double normal_log_cdf(double t) noexcept;
// Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

// lambda_1(t) = phi(t) / Phi(t) and lambda_0(t) = phi(t) / (1 - Phi(t)).
// Beyond |t| = 8 on the vanishing side a continued fraction replaces the
// ratio, so the result stays finite and positive for every finite t.
double inverse_mills(double t, Arm arm) noexcept;

// ---------------------------------------------------------------------------
// Design matrices and linear fits

// Covariate matrix with a leading intercept column. Rows are observations.
class DesignMatrix {
 public:
  // Validates that column 0 is exactly 1.0, rows >= cols and entries finite.
  explicit DesignMatrix(Matrix values);

  // Prepends the intercept column to `covariates` (n x p).
  static DesignMatrix with_intercept(const Matrix& covariates);

  const Matrix& values() const noexcept { return values_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  kernels::ColMajorView view() const noexcept;

 private:
  Matrix values_;
};

// Rows of `x` where mask == value (mask entries are 0.0 / 1.0).
Matrix select_rows(const Matrix& x, const Vector& mask, double value);
Vector select_rows(const Vector& v, const Vector& mask, double value);

struct OlsFit {
  Vector coefficients;
  Vector residuals;
  // Sum of squared residuals over (rows - cols); 0 when rows == cols.
  double residual_variance = 0.0;
  Matrix gram_inverse;  // (X'X)^{-1}
  Index rows = 0;
  int fitted_group = -1;  // arm label when fit on one arm, else -1
};

// Least squares via column-pivoted Householder QR. Throws SingularityError
// naming the first column found to be linearly dependent.
OlsFit fit_ols(const Matrix& x, const Vector& y, int fitted_group = -1);
inline OlsFit fit_ols(const DesignMatrix& x, const Vector& y, int fitted_group = -1) {
  return fit_ols(x.values(), y, fitted_group);
}

// ---------------------------------------------------------------------------
// Probit regression

struct ProbitOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-8;   // on the summed score, max-norm
  double divergence_bound = 1e3;   // |gamma|_inf beyond this flags separation
};

struct ProbitFit {
  Vector gamma;
  Vector linear_index;  // g(x_i; gamma) = gamma' x_i
  Vector propensity;    // Phi(linear_index)
  double log_likelihood = 0.0;
  double max_abs_score = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;
};

// Score of the probit log-likelihood at gamma (summed over rows).
Vector probit_score(const Matrix& x, const Vector& z, const Vector& gamma);

// Newton-Raphson with step halving. Throws DegenerateTreatmentError when z
// has a single class; quasi-complete separation is reported through
// `separation` and converged == false rather than thrown.
ProbitFit fit_probit(const DesignMatrix& x, const Vector& z,
                     const ProbitOptions& options = {});

// ---------------------------------------------------------------------------
// Seeded random numbers

struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// Stream r of seed s is std::mt19937_64 seeded with
// splitmix64(s ^ splitmix64(r + 0x9E3779B97F4A7C15)). Doubles use the top 53
// bits; normals use the inverse cdf. Every step is fully specified, so draws
// do not depend on the standard library's distribution classes. Bump
// kRngVersion if any of this changes.
class Rng {
 public:
  static constexpr int kRngVersion = 1;

  explicit Rng(RngSeed seed);

  double uniform() noexcept;  // open interval (0, 1)
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;
  bool bernoulli(double p) noexcept;

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Matrix of n draws (rows) from N(mean, covariance). The covariance may be
// singular; a pivoted LDL' factor stands in for Cholesky. Throws
// DecompositionError when the covariance is not positive semi-definite.
Matrix sample_mvn(const Vector& mean, const Matrix& covariance, RngSeed seed,
                  Index n);
Matrix sample_mvn(const Vector& mean, const Matrix& covariance, Rng& rng,
                  Index n);

// Factor F with F F' = covariance, as used by sample_mvn.
Matrix psd_factor(const Matrix& covariance);

}  // namespace confound_ui
