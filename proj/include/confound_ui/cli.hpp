#pragma once

#include <atomic>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "confound_ui/bias_ui.hpp"
#include "confound_ui/simulation.hpp"

namespace confound_ui::cli {

inline constexpr const char* kSchemaVersion = "1";

// Parsed RFC 4180 file: header plus rows of raw fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws InputError naming the column when it is absent.
  std::size_t column(const std::string& name) const;
};

// Throws InputError on unterminated quotes, ragged rows or an empty file.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

enum class Command { Estimate, Ui, Sensitivity, Simulate };
enum class Format { Json, Csv, Table };

std::string_view to_string(Command c) noexcept;
std::string_view to_string(Format f) noexcept;
Format parse_format(std::string_view s);

struct RunConfig {
  Command command = Command::Estimate;

  // data commands
  std::string input;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  std::vector<std::string> treatment_covariates;  // empty: same as covariates
  std::optional<RhoInterval> rho0;
  std::optional<RhoInterval> rho1;  // defaults to rho0
  double alpha = 0.05;
  int grid = 101;
  std::optional<double> clip_propensity;
  bool large_sample_var = false;
  std::vector<sim::EstimatorKey> estimators;  // empty: all four

  // sensitivity
  SensitivityMode sensitivity_mode = SensitivityMode::Symmetric;
  double tol = 1e-6;
  double plausible_rho = 0.1;

  // simulate
  std::uint64_t seed = 1;
  sim::Design design = sim::Design::A;
  sim::Overlap overlap = sim::Overlap::LowL1;
  Index n = 500;
  int reps = 1000;
  double true_rho0 = 0.0;
  double true_rho1 = 0.0;
  std::vector<RhoInterval> ui_intervals;  // empty: [0, 0.2] and [0, 0.4]
  std::string out_prefix;  // simulate: write <prefix>.csv and <prefix>.json
  int threads = 0;

  Format format = Format::Table;

  // Throws InputError on values outside their domains.
  void validate() const;
};

// "low,high" -> interval; a single number v gives [v, v].
RhoInterval parse_rho_interval(std::string_view s);
sim::EstimatorKey parse_estimator(std::string_view s);

struct IngestedData {
  Dataset data;
  DesignMatrix treatment_design;
  std::vector<std::string> covariates;
  std::vector<std::string> treatment_covariates;
};

// Builds the dataset (intercept prepended). Errors cite the 1-based data row
// and the column name.
IngestedData ingest_csv(const CsvTable& table, const RunConfig& config);
IngestedData ingest_csv(const std::string& path, const RunConfig& config);

// Set from a signal handler to stop a running simulation early; finished
// replications are still written.
extern std::atomic<bool> g_interrupted;

// Runs the command and writes its report. Returns the process exit code:
// 0 success, 1 command error (message on `err`).
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace confound_ui::cli
