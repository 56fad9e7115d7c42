#include <CLI11.hpp>
#include <csignal>
#include <iostream>

#include "confound_ui/cli.hpp"
#include "confound_ui/error.hpp"

namespace cui = confound_ui;
namespace cli = confound_ui::cli;

namespace {

extern "C" void on_sigint(int) { cli::g_interrupted.store(true); }

struct RawOptions {
  std::string rho0, rho1, format = "table", design = "A", overlap = "low", mode = "symmetric";
  std::vector<std::string> estimators, uis;
  std::string covariates, treatment_covariates;
  double clip = 0.0;
  double true_rho = 0.0;
  std::optional<double> true_rho0, true_rho1;
};

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  return out;
}

void add_data_options(CLI::App* sub, cli::RunConfig& cfg, RawOptions& raw) {
  sub->add_option("--input", cfg.input, "CSV file with a header row")->required();
  sub->add_option("--outcome", cfg.outcome, "outcome column")->required();
  sub->add_option("--treatment", cfg.treatment, "0/1 treatment column")->required();
  sub->add_option("--covariates", raw.covariates, "comma-separated outcome-model covariates");
  sub->add_option("--treatment-covariates", raw.treatment_covariates,
                  "comma-separated treatment-model covariates (default: --covariates)");
  sub->add_option("--rho0", raw.rho0, "rho interval for the control arm, \"low,high\"");
  sub->add_option("--rho1", raw.rho1, "rho interval for the treated arm (default: --rho0)");
  sub->add_option("--estimator", raw.estimators, "or_att, dr_att, or_ate, dr_ate (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal effect estimates with uncertainty intervals for unobserved confounding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "confound_ui 0.1.0");

  cli::RunConfig cfg;
  RawOptions raw;

  auto* estimate = app.add_subcommand("estimate", "point estimates, standard errors and CIs");
  auto* ui = app.add_subcommand("ui", "identification and uncertainty intervals for given rho");
  auto* sens = app.add_subcommand("sensitivity", "smallest rho whose interval reaches zero");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on a built-in design");

  for (auto* sub : {estimate, ui, sens}) add_data_options(sub, cfg, raw);
  sens->add_option("--mode", raw.mode, "symmetric ([-r, r]) or one_sided ([0, r])")
      ->check(CLI::IsMember({"symmetric", "one_sided"}));
  sens->add_option("--tol", cfg.tol, "bisection tolerance on rho");
  sens->add_option("--plausible-rho", cfg.plausible_rho,
                   "largest rho considered plausible; thresholds above it PASS");

  simulate->add_option("--design", raw.design, "A, B, C or D");
  simulate->add_option("--overlap", raw.overlap, "low or high (L1 imbalance)");
  simulate->add_option("--n", cfg.n, "sample size");
  simulate->add_option("--reps", cfg.reps, "replications");
  simulate->add_option("--seed", cfg.seed, "base seed");
  auto* tr = simulate->add_option("--true-rho", raw.true_rho, "true rho for both arms");
  simulate->add_option("--true-rho0", raw.true_rho0, "true rho for the control arm")->excludes(tr);
  simulate->add_option("--true-rho1", raw.true_rho1, "true rho for the treated arm")->excludes(tr);
  simulate->add_option("--ui", raw.uis, "UI rho interval \"low,high\" (repeatable)");
  simulate->add_option("--out-prefix", cfg.out_prefix, "write <prefix>.csv and <prefix>.json");
  simulate->add_option("--threads", cfg.threads, "worker threads (0: automatic)");

  for (auto* sub : {estimate, ui, sens, simulate}) {
    sub->add_option("--alpha", cfg.alpha, "1 - confidence level");
    sub->add_option("--grid", cfg.grid, "rho grid points per arm");
    sub->add_option("--format", raw.format, "json, csv or table")
        ->check(CLI::IsMember({"json", "csv", "table"}));
    sub->add_option("--clip-propensity", raw.clip, "clip propensities to [eps, 1 - eps]");
    sub->add_flag("--large-sample-var", cfg.large_sample_var,
                  "large-sample variance instead of the sandwich where one exists");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (estimate->parsed()) cfg.command = cli::Command::Estimate;
    if (ui->parsed()) cfg.command = cli::Command::Ui;
    if (sens->parsed()) cfg.command = cli::Command::Sensitivity;
    if (simulate->parsed()) cfg.command = cli::Command::Simulate;

    cfg.format = cli::parse_format(raw.format);
    cfg.covariates = split_names(raw.covariates);
    cfg.treatment_covariates = split_names(raw.treatment_covariates);
    if (!raw.rho0.empty()) cfg.rho0 = cli::parse_rho_interval(raw.rho0);
    if (!raw.rho1.empty()) cfg.rho1 = cli::parse_rho_interval(raw.rho1);
    for (const auto& e : raw.estimators) {
      for (const auto& name : split_names(e)) cfg.estimators.push_back(cli::parse_estimator(name));
    }
    for (const auto& u : raw.uis) cfg.ui_intervals.push_back(cli::parse_rho_interval(u));
    if (raw.clip != 0.0) cfg.clip_propensity = raw.clip;
    cfg.sensitivity_mode =
        raw.mode == "one_sided" ? cui::SensitivityMode::OneSided : cui::SensitivityMode::Symmetric;
    cfg.design = cui::sim::parse_design(raw.design);
    cfg.overlap = cui::sim::parse_overlap(raw.overlap);
    cfg.true_rho0 = raw.true_rho0.value_or(raw.true_rho);
    cfg.true_rho1 = raw.true_rho1.value_or(raw.true_rho);
  } catch (const cui::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  std::signal(SIGINT, on_sigint);
  return cli::run(cfg, std::cout, std::cerr);
}
