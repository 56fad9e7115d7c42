#pragma once

#include <vector>

#include "confound_ui/estimators.hpp"

namespace confound_ui {

// Closed sub-interval of [-1, 1].
struct RhoInterval {
  double low = 0.0;
  double high = 0.0;

  RhoInterval() = default;
  // Throws DomainError unless -1 <= low <= high <= 1.
  RhoInterval(double low, double high);
  static RhoInterval point(double rho) { return RhoInterval(rho, rho); }

  bool degenerate() const noexcept { return low == high; }
  bool contains(double rho) const noexcept { return low <= rho && rho <= high; }
};

struct RhoPair {
  RhoInterval rho0;
  RhoInterval rho1;  // ignored by ATT
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const noexcept { return upper - lower; }
  bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

struct UncertaintyInterval {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  RhoPair rho;
  Estimand estimand = Estimand::ATE;
  Estimator estimator = Estimator::OR;
  Interval identification;  // the same optimum without the +-c*se term

  double width() const noexcept { return upper - lower; }
  bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

// Residual standard deviation of arm j corrected for selection on eta:
//
//   sigma_j^2 = s_j^2 / (1 + (-1)^j rho^2 g'lambda_j / m_j - rho^2 lambda_j'H_j lambda_j / m_j)
//
// with s_j^2 the OLS residual variance, m_j = n_j - cols, H_j the hat matrix
// of the arm-j design and g, lambda_j taken on arm-j rows. Throws
// InfeasibleRhoError when the denominator is not positive.
double sigma_corrected(double rho, const Dataset& data, const FittedModels& models, Arm arm);

// Everything the confounding-bias plug-ins need, computed once per fit. Every
// bias is rho0 * sigma_0(rho0) * k_0 + rho1 * sigma_1(rho1) * k_1 for
// estimator-specific constants k_j, so it separates across the two axes.
class BiasModel {
 public:
  BiasModel(const Dataset& data, const FittedModels& models, Estimand estimand,
            Estimator estimator);

  double sigma(Arm arm, double rho) const;
  // rho * sigma_j(rho) * k_j
  double arm_term(Arm arm, double rho) const;
  double bias(double rho0, double rho1) const;

  double coefficient(Arm arm) const noexcept { return k_[idx(arm)]; }
  bool uses_arm(Arm arm) const noexcept { return arm == Arm::Control || estimand_ == Estimand::ATE; }
  // Largest |rho| for which sigma_j stays finite; 1 when no limit applies.
  double feasibility_limit(Arm arm) const noexcept;
  Estimand estimand() const noexcept { return estimand_; }
  Estimator estimator() const noexcept { return estimator_; }

 private:
  static int idx(Arm a) noexcept { return static_cast<int>(a); }

  Estimand estimand_;
  Estimator estimator_;
  double s2_[2] = {0.0, 0.0};
  double shrink_[2] = {0.0, 0.0};  // denominator is 1 - rho^2 * shrink_j
  double k_[2] = {0.0, 0.0};
};

double bias_c_or_att(const Dataset& data, const FittedModels& models, double rho0);
double bias_c_or_ate(const Dataset& data, const FittedModels& models, double rho0, double rho1);
double bias_c_dr_att(const Dataset& data, const FittedModels& models, double rho0);
double bias_c_dr_ate(const Dataset& data, const FittedModels& models, double rho0, double rho1);

// Grid of `grid` equally spaced points from low to high, endpoints exact. A
// degenerate interval yields the single point.
std::vector<double> rho_grid(const RhoInterval& rho, int grid);

// [min, max] of value - bias(rho0, rho1) over the product grid.
Interval identification_interval(const EffectEstimate& estimate, const RhoPair& rho,
                                 int grid = 101);

UncertaintyInterval uncertainty_interval(const EffectEstimate& estimate, const RhoPair& rho,
                                         double alpha = 0.05, int grid = 101);

// Ordinary (1 - alpha) confidence interval, value -+ c * se.
Interval confidence_interval(const EffectEstimate& estimate, double alpha = 0.05);

enum class SensitivityMode { Symmetric, OneSided };

struct SensitivityResult {
  double threshold = 0.0;
  bool ci_covers_zero = false;
  // False when the UI still excludes zero at the largest feasible rho; the
  // threshold is then that limit.
  bool reached = true;
  double feasibility_limit = 1.0;
  UncertaintyInterval ui;  // at the threshold
  int iterations = 0;
};

// Smallest r >= 0 such that the UI over [-r, r] (Symmetric) or [0, r]
// (OneSided) on every relevant arm covers zero, found by bisection to tol.
SensitivityResult sensitivity_threshold(const EffectEstimate& estimate, double alpha = 0.05,
                                        SensitivityMode mode = SensitivityMode::Symmetric,
                                        double tol = 1e-6, int grid = 101);

RhoInterval sensitivity_interval(double r, SensitivityMode mode);

}  // namespace confound_ui
