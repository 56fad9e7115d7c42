#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "confound_ui/bias_ui.hpp"
#include "confound_ui/estimators.hpp"
#include "confound_ui/variance.hpp"

namespace confound_ui::sim {

enum class Design { A, B, C, D };
// LowL1 is the well-overlapping assignment, HighL1 the imbalanced one.
enum class Overlap { LowL1, HighL1 };

std::string_view to_string(Design d) noexcept;
std::string_view to_string(Overlap o) noexcept;
// Accepts "A".."D" (any case) and "low"/"high" (also "low_L1"/"high_L1").
Design parse_design(std::string_view s);
Overlap parse_overlap(std::string_view s);

struct SimulationDesign {
  Design design = Design::A;
  Overlap overlap = Overlap::LowL1;
  Index n = 500;
  double rho0 = 0.0;
  double rho1 = 0.0;

  // Throws DomainError for n < 50 or rho outside [-1, 1], DecompositionError
  // when the error correlation matrix is not positive semi-definite.
  void validate() const;
};

// Treatment-model coefficients, intercept first.
Vector design_gamma(Design d, Overlap o);
// Number of covariates excluding the intercept (1 for A/B, 5 for C/D).
Index design_covariates(Design d) noexcept;

double h0(double x) noexcept;
double h1(double x) noexcept;

// Structural outcome functions on a covariate row (intercept excluded).
double f0(Design d, const double* x) noexcept;
double f1(Design d, const double* x) noexcept;

// Bernoulli probabilities in designs C/D are clamped to this range.
inline constexpr double kProbabilityFloor = 0.001;
inline constexpr double kProbabilityCeil = 0.999;

struct SimulatedData {
  Dataset data;
  Vector f0;                 // true f0(x_i)
  Vector f1;                 // true f1(x_i)
  Vector true_propensity;    // Phi(gamma'x_i)
  Index clamped_probabilities = 0;
};

// Draw order per sample: covariates row by row, then (eta, eps0, eps1) row by
// row, all from one stream. Outcomes use unit error variance.
SimulatedData generate(const SimulationDesign& design, RngSeed seed);

// Population estimands under the design, by deterministic quadrature.
struct PopulationTruth {
  double ate = 0.0;
  double att = 0.0;
  double treated_fraction = 0.0;
};
PopulationTruth population_truth(const SimulationDesign& design);

// Histogram breaks as R's pretty(range(x), nclass.Sturges(x)) for `count`
// observations spanning [lo, hi].
std::vector<double> sturges_breaks(double lo, double hi, std::size_t count);

// Half the summed absolute difference of within-group bin proportions, on
// right-closed bins shared by both groups. Throws InputError on an empty
// group.
double l1_imbalance(const Vector& ps_treated, const Vector& ps_control);
// Splits by treatment and calls the above.
double l1_imbalance_by_arm(const Vector& propensity, const Vector& z);

struct MisspecificationBias {
  double att = 0.0;
  double ate = 0.0;
};
// Outcome-regression bias from fitting linear models to the true f0, f1, with
// the realized design matrices.
MisspecificationBias bias_m_or(const Dataset& data, const FittedModels& models,
                               const Vector& f0, const Vector& f1);

// ---------------------------------------------------------------------------
// Monte Carlo study

struct UiSpec {
  RhoPair rho;
  double alpha = 0.05;
  std::string label;  // "0-0.2" style; derived when empty
};

struct StudyConfig {
  SimulationDesign design;
  int replications = 1000;
  std::uint64_t seed = 1;
  double alpha = 0.05;  // for the confidence interval
  int grid = 101;
  std::vector<UiSpec> uis;
  VarianceMethod variance = VarianceMethod::Sandwich;
  std::optional<double> clip_propensity;
  int threads = 0;  // 0: CONFOUND_UI_THREADS, else hardware concurrency
  // When set and raised, workers stop taking new replications; those never
  // started are marked "not_run".
  const std::atomic<bool>* stop = nullptr;
};

// The four estimator/estimand combinations in report order.
struct EstimatorKey {
  Estimand estimand;
  Estimator estimator;
};
inline constexpr EstimatorKey kEstimators[4] = {{Estimand::ATT, Estimator::OR},
                                                {Estimand::ATT, Estimator::DR},
                                                {Estimand::ATE, Estimator::OR},
                                                {Estimand::ATE, Estimator::DR}};
std::string estimator_label(const EstimatorKey& k);  // "or_att" etc.

struct EstimatorRecord {
  double value = 0.0;
  double std_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::vector<double> ui_lower;  // per UiSpec
  std::vector<double> ui_upper;
  double bias_c = 0.0;  // plug-in confounding bias at the true rho
  double bias_m = 0.0;  // misspecification bias; 0 for DR
  // bias_c with the true error sd (1 in every design) in place of sigma-hat
  double bias_c_oracle = 0.0;
};

struct ReplicationRecord {
  int replication = 0;
  bool ok = false;
  std::string failure;  // error category when !ok
  std::string message;
  double treated_fraction = 0.0;
  double l1 = 0.0;  // on the fitted propensities
  Index clamped_probabilities = 0;
  Index clipped_propensities = 0;
  bool ill_conditioned = false;
  EstimatorRecord est[4];
};

struct Summary {
  double mean = 0.0;
  double mc_se = 0.0;  // NaN when fewer than 2 values
};

struct UiAggregate {
  std::string label;
  Summary coverage;
  Summary width;
  double median_width = 0.0;
  double median_width_ratio = 0.0;  // width(UI) / width(CI)
};

struct EstimatorAggregate {
  std::string label;
  double truth = 0.0;
  Summary estimate;
  Summary empirical_bias;  // estimate - truth
  Summary bias_c;
  Summary bias_m;
  Summary bias_t;          // bias_c + bias_m
  Summary bias_gap;        // estimate - truth - bias_t, paired per replication
  Summary bias_c_oracle;
  Summary bias_gap_oracle;  // as bias_gap with bias_c_oracle
  Summary std_error;
  Summary ci_coverage;
  Summary ci_width;
  double ci_width_q25 = 0.0;
  double ci_width_median = 0.0;
  double ci_width_q75 = 0.0;
  std::vector<UiAggregate> uis;
};

struct StudyResult {
  StudyConfig config;
  PopulationTruth truth;
  std::vector<ReplicationRecord> replications;
  int succeeded = 0;
  int excluded = 0;
  int not_run = 0;
  std::map<std::string, int> exclusion_reasons;
  double mean_l1 = 0.0;
  Index clamped_probabilities = 0;
  EstimatorAggregate estimators[4];
};

// Replication r uses stream r of config.seed, so its record does not depend on
// which other replications run or on the thread count.
ReplicationRecord run_replication(const StudyConfig& config, const PopulationTruth& truth,
                                  int replication);
StudyResult run_study(const StudyConfig& config);

// Recomputes the aggregates from result.replications.
void aggregate(StudyResult& result);

// Threads to use: CONFOUND_UI_THREADS if set (>= 1), else hardware
// concurrency, capped by `requested` when positive.
int resolve_threads(int requested);

std::string default_ui_label(const UiSpec& spec);

}  // namespace confound_ui::sim
