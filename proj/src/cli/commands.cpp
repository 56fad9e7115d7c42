#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "confound_ui/cli.hpp"
#include "confound_ui/error.hpp"

namespace confound_ui::cli {

std::atomic<bool> g_interrupted{false};

namespace {

using nlohmann::ordered_json;

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
  return std::string(s.substr(a, b - a));
}

std::optional<double> to_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

std::string num17(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num4(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ordered_json jnum(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json jinterval(const RhoInterval& r) { return ordered_json::array({r.low, r.high}); }

std::string rho_text(const RhoInterval& r) {
  return "[" + num4(r.low) + ", " + num4(r.high) + "]";
}

// Fixed-width text table, first column left-aligned.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void print(std::ostream& out) const {
    std::vector<std::size_t> w;
    for (const auto& r : rows_) {
      if (w.size() < r.size()) w.resize(r.size(), 0);
      for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
    }
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto& r = rows_[k];
      for (std::size_t i = 0; i < r.size(); ++i) {
        const std::string pad(w[i] - r[i].size(), ' ');
        out << (i ? "  " : "") << (i == 0 ? r[i] + pad : pad + r[i]);
      }
      out << '\n';
      if (k == 0) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < w.size(); ++i) total += w[i] + (i ? 2 : 0);
        out << std::string(total, '-') << '\n';
      }
    }
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::vector<sim::EstimatorKey> requested(const RunConfig& c) {
  if (!c.estimators.empty()) return c.estimators;
  return {std::begin(sim::kEstimators), std::end(sim::kEstimators)};
}

RhoPair rho_pair(const RunConfig& c) {
  const RhoInterval r0 = c.rho0 ? *c.rho0 : RhoInterval();
  const RhoInterval r1 = c.rho1 ? *c.rho1 : r0;
  return {r0, r1};
}

std::vector<RhoInterval> ui_intervals(const RunConfig& c) {
  if (!c.ui_intervals.empty()) return c.ui_intervals;
  return {RhoInterval(0.0, 0.2), RhoInterval(0.0, 0.4)};
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["command"] = std::string(to_string(c.command));
  if (c.command == Command::Simulate) {
    j["seed"] = c.seed;
    j["design"] = std::string(sim::to_string(c.design));
    j["overlap"] = std::string(sim::to_string(c.overlap));
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["true_rho0"] = c.true_rho0;
    j["true_rho1"] = c.true_rho1;
    ordered_json uis = ordered_json::array();
    for (const auto& r : ui_intervals(c)) uis.push_back(jinterval(r));
    j["ui_intervals"] = uis;
    j["rng_version"] = Rng::kRngVersion;
  } else {
    j["input"] = c.input;
    j["outcome"] = c.outcome;
    j["treatment"] = c.treatment;
    j["covariates"] = c.covariates;
    j["treatment_covariates"] =
        c.treatment_covariates.empty() ? c.covariates : c.treatment_covariates;
    if (c.rho0) {
      const RhoPair p = rho_pair(c);
      j["rho0"] = jinterval(p.rho0);
      j["rho1"] = jinterval(p.rho1);
    } else {
      j["rho0"] = nullptr;
      j["rho1"] = nullptr;
    }
    ordered_json est = ordered_json::array();
    for (const auto& k : requested(c)) est.push_back(sim::estimator_label(k));
    j["estimators"] = est;
  }
  j["alpha"] = c.alpha;
  j["grid"] = c.grid;
  j["clip_propensity"] = c.clip_propensity ? ordered_json(*c.clip_propensity) : nullptr;
  j["variance"] = c.large_sample_var ? "large_sample" : "sandwich";
  if (c.command == Command::Sensitivity) {
    j["sensitivity_mode"] =
        c.sensitivity_mode == SensitivityMode::Symmetric ? "symmetric" : "one_sided";
    j["tol"] = c.tol;
    j["plausible_rho"] = c.plausible_rho;
  }
  return j;
}

ordered_json header_json(const RunConfig& c) {
  ordered_json j;
  j["schema"] = "confound_ui." + std::string(to_string(c.command));
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_json(c);
  return j;
}

std::string csv_preamble(const RunConfig& c) {
  return "# " + header_json(c).dump() + "\n";
}

// ---------------------------------------------------------------------------
// Data commands

struct EstimatorReport {
  sim::EstimatorKey key{};
  bool ok = false;
  std::string error;
  EffectEstimate estimate;
  Interval ci;
  VarianceResult variance;
  std::optional<UncertaintyInterval> ui;
  std::optional<SensitivityResult> sensitivity;
  std::string verdict;
};

struct DataRun {
  std::shared_ptr<const Analysis> analysis;
  IngestedData ingested;
  std::vector<std::string> warnings;
  std::vector<EstimatorReport> reports;
};

DataRun fit_data(const RunConfig& cfg) {
  IngestedData ing = ingest_csv(cfg.input, cfg);
  FitOptions opts;
  opts.clip_propensity = cfg.clip_propensity;
  FittedModels models = fit_models(ing.data, ing.treatment_design, opts);
  std::vector<std::string> warnings;
  if (models.probit->separation) {
    warnings.push_back("probit: quasi-complete separation detected; propensities near 0 or 1");
  } else if (!models.probit->converged) {
    warnings.push_back("probit: Newton iterations did not converge (max |score| " +
                       num4(models.probit->max_abs_score) + ")");
  }
  if (models.clip_propensity) {
    warnings.push_back("propensities clipped to [" + num4(*models.clip_propensity) + ", " +
                       num4(1.0 - *models.clip_propensity) + "]; " +
                       std::to_string(models.clipped_rows) + " rows affected");
  }
  auto analysis = std::make_shared<const Analysis>(Analysis{ing.data, std::move(models)});
  return DataRun{std::move(analysis), std::move(ing), std::move(warnings), {}};
}

void estimate_all(const RunConfig& cfg, DataRun& run) {
  const VarianceMethod method =
      cfg.large_sample_var ? VarianceMethod::LargeSample : VarianceMethod::Sandwich;
  const Analysis& a = *run.analysis;
  for (const auto& key : requested(cfg)) {
    EstimatorReport r;
    r.key = key;
    try {
      r.estimate.estimand = key.estimand;
      r.estimate.estimator = key.estimator;
      r.estimate.value = point_estimate(a.data, a.models, key.estimand, key.estimator);
      r.variance = estimator_variance(a.data, a.models, key.estimand, key.estimator, method);
      r.estimate.std_error = std::sqrt(r.variance.variance);
      r.estimate.source = run.analysis;
      r.ci = confidence_interval(r.estimate, cfg.alpha);
      if (r.variance.ill_conditioned) {
        run.warnings.push_back(sim::estimator_label(key) +
                               ": sandwich bread is ill-conditioned (condition " +
                               num4(r.variance.condition) + ")");
      }
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
    run.reports.push_back(std::move(r));
  }
}

ordered_json data_json(const DataRun& run) {
  const Dataset& d = run.analysis->data;
  ordered_json j;
  j["n"] = d.n();
  j["n_treated"] = d.n1();
  j["n_control"] = d.n0();
  j["covariates"] = run.ingested.covariates;
  j["treatment_covariates"] = run.ingested.treatment_covariates;
  return j;
}

ordered_json diagnostics_json(const DataRun& run) {
  const FittedModels& m = run.analysis->models;
  const Dataset& d = run.analysis->data;
  ordered_json j;
  ordered_json p;
  p["converged"] = m.probit->converged;
  p["separation"] = m.probit->separation;
  p["iterations"] = m.probit->iterations;
  p["max_abs_score"] = jnum(m.probit->max_abs_score);
  p["log_likelihood"] = jnum(m.probit->log_likelihood);
  j["probit"] = p;
  j["propensity_min"] = jnum(m.propensity.minCoeff());
  j["propensity_max"] = jnum(m.propensity.maxCoeff());
  j["l1_imbalance"] = jnum(sim::l1_imbalance_by_arm(m.propensity, d.z()));
  j["clipped_rows"] = m.clipped_rows;
  j["residual_variance_control"] = jnum(m.ols0.residual_variance);
  j["residual_variance_treated"] = jnum(m.ols1.residual_variance);
  j["warnings"] = run.warnings;
  return j;
}

ordered_json report_json(const EstimatorReport& r, bool with_ui) {
  ordered_json j;
  j["estimand"] = std::string(to_string(r.key.estimand));
  j["estimator"] = std::string(to_string(r.key.estimator));
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["estimate"] = jnum(r.estimate.value);
  j["std_error"] = jnum(r.estimate.std_error);
  j["ci_lower"] = jnum(r.ci.lower);
  j["ci_upper"] = jnum(r.ci.upper);
  j["condition"] = jnum(r.variance.condition);
  j["ill_conditioned"] = r.variance.ill_conditioned;
  if (with_ui) {
    if (r.ui) {
      j["identification_lower"] = jnum(r.ui->identification.lower);
      j["identification_upper"] = jnum(r.ui->identification.upper);
      j["ui_lower"] = jnum(r.ui->lower);
      j["ui_upper"] = jnum(r.ui->upper);
    } else {
      j["ui_error"] = r.error;
    }
  }
  if (r.sensitivity) {
    const SensitivityResult& s = *r.sensitivity;
    j["threshold"] = jnum(s.threshold);
    j["ci_covers_zero"] = s.ci_covers_zero;
    j["threshold_reached"] = s.reached;
    j["feasibility_limit"] = jnum(s.feasibility_limit);
    j["ui_lower_at_threshold"] = jnum(s.ui.lower);
    j["ui_upper_at_threshold"] = jnum(s.ui.upper);
    j["verdict"] = r.verdict;
  }
  return j;
}

void write_data_report(const RunConfig& cfg, const DataRun& run, bool with_ui,
                       std::ostream& out) {
  const bool sens = cfg.command == Command::Sensitivity;
  if (cfg.format == Format::Json) {
    ordered_json j = header_json(cfg);
    j["data"] = data_json(run);
    j["diagnostics"] = diagnostics_json(run);
    ordered_json rs = ordered_json::array();
    for (const auto& r : run.reports) rs.push_back(report_json(r, with_ui));
    j["results"] = rs;
    out << j.dump(2) << '\n';
    return;
  }
  if (cfg.format == Format::Csv) {
    out << csv_preamble(cfg);
    out << "estimand,estimator,estimate,std_error,ci_lower,ci_upper";
    if (with_ui) out << ",identification_lower,identification_upper,ui_lower,ui_upper";
    if (sens) {
      out << ",threshold,ci_covers_zero,threshold_reached,feasibility_limit,"
             "ui_lower_at_threshold,ui_upper_at_threshold,verdict";
    }
    out << ",condition,ill_conditioned,error\n";
    for (const auto& r : run.reports) {
      out << to_string(r.key.estimand) << ',' << to_string(r.key.estimator);
      const auto f = [&](double v, bool have) { out << ',' << (have ? num17(v) : "NA"); };
      f(r.estimate.value, r.ok);
      f(r.estimate.std_error, r.ok);
      f(r.ci.lower, r.ok);
      f(r.ci.upper, r.ok);
      if (with_ui) {
        const bool u = r.ok && r.ui.has_value();
        f(u ? r.ui->identification.lower : 0.0, u);
        f(u ? r.ui->identification.upper : 0.0, u);
        f(u ? r.ui->lower : 0.0, u);
        f(u ? r.ui->upper : 0.0, u);
      }
      if (sens) {
        const bool s = r.sensitivity.has_value();
        f(s ? r.sensitivity->threshold : 0.0, s);
        out << ',' << (s ? (r.sensitivity->ci_covers_zero ? "1" : "0") : "NA");
        out << ',' << (s ? (r.sensitivity->reached ? "1" : "0") : "NA");
        f(s ? r.sensitivity->feasibility_limit : 0.0, s);
        f(s ? r.sensitivity->ui.lower : 0.0, s);
        f(s ? r.sensitivity->ui.upper : 0.0, s);
        out << ',' << (s ? r.verdict : "NA");
      }
      f(r.variance.condition, r.ok);
      out << ',' << (r.ok && r.variance.ill_conditioned ? "1" : "0");
      std::string e = r.error;
      for (char& c : e) {
        if (c == '"') c = '\'';
      }
      out << ",\"" << e << "\"\n";
    }
    return;
  }

  const Dataset& d = run.analysis->data;
  out << "n = " << d.n() << " (treated " << d.n1() << ", control " << d.n0() << ")\n";
  if (with_ui || sens) {
    const RhoPair p = rho_pair(cfg);
    if (!sens) out << "rho0 in " << rho_text(p.rho0) << ", rho1 in " << rho_text(p.rho1) << '\n';
  }
  std::vector<std::string> head = {"estimator", "coef", "s.e.",
                                   "CI " + num4(100.0 * (1.0 - cfg.alpha)) + "%"};
  if (with_ui) {
    head.push_back("ident. interval");
    head.push_back("UI");
  }
  if (sens) {
    head.push_back("threshold");
    head.push_back("UI at threshold");
    head.push_back("verdict");
  }
  TextTable t(head);
  const auto iv = [](double a, double b) { return "[" + num4(a) + ", " + num4(b) + "]"; };
  for (const auto& r : run.reports) {
    std::vector<std::string> row = {std::string(to_string(r.key.estimator)) + " " +
                                    std::string(to_string(r.key.estimand))};
    if (!r.ok) {
      row.push_back("error: " + r.error);
      t.add(row);
      continue;
    }
    row.push_back(num4(r.estimate.value));
    row.push_back(num4(r.estimate.std_error));
    row.push_back(iv(r.ci.lower, r.ci.upper));
    if (with_ui) {
      if (r.ui) {
        row.push_back(iv(r.ui->identification.lower, r.ui->identification.upper));
        row.push_back(iv(r.ui->lower, r.ui->upper));
      } else {
        row.push_back("infeasible");
        row.push_back(r.error);
      }
    }
    if (sens) {
      if (r.sensitivity) {
        const auto& s = *r.sensitivity;
        row.push_back((s.reached ? "" : ">= ") + num4(s.threshold));
        row.push_back(iv(s.ui.lower, s.ui.upper));
        row.push_back(r.verdict);
      } else {
        row.push_back("error");
        row.push_back(r.error);
        row.push_back("");
      }
    }
    t.add(row);
  }
  t.print(out);
  for (const auto& w : run.warnings) out << "warning: " << w << '\n';
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  DataRun run = fit_data(cfg);
  estimate_all(cfg, run);
  const bool with_ui = cfg.rho0.has_value();
  if (with_ui) {
    const RhoPair rho = rho_pair(cfg);
    for (auto& r : run.reports) {
      if (!r.ok) continue;
      try {
        r.ui = uncertainty_interval(r.estimate, rho, cfg.alpha, cfg.grid);
      } catch (const InfeasibleRhoError& e) {
        r.error = e.what();
      }
    }
  }
  for (const auto& w : run.warnings) err << "warning: " << w << '\n';
  write_data_report(cfg, run, with_ui, out);
  return 0;
}

int cmd_ui(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!cfg.rho0) throw InputError("ui needs --rho0 (and optionally --rho1)");
  return cmd_estimate(cfg, out, err);
}

int cmd_sensitivity(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  DataRun run = fit_data(cfg);
  estimate_all(cfg, run);
  for (auto& r : run.reports) {
    if (!r.ok) continue;
    try {
      r.sensitivity =
          sensitivity_threshold(r.estimate, cfg.alpha, cfg.sensitivity_mode, cfg.tol, cfg.grid);
      const auto& s = *r.sensitivity;
      // Robust only if it takes more confounding than deemed plausible to
      // make the interval reach zero.
      r.verdict = !s.ci_covers_zero && s.threshold > cfg.plausible_rho ? "PASS" : "SENSITIVE";
    } catch (const Error& e) {
      r.error = e.what();
    }
  }
  for (const auto& w : run.warnings) err << "warning: " << w << '\n';
  write_data_report(cfg, run, false, out);
  return 0;
}

// ---------------------------------------------------------------------------
// Simulation

ordered_json summary_json(const sim::Summary& s) {
  return ordered_json{{"mean", jnum(s.mean)}, {"mc_se", jnum(s.mc_se)}};
}

ordered_json study_json(const RunConfig& cfg, const sim::StudyResult& r, bool interrupted) {
  ordered_json j = header_json(cfg);
  j["truth"] = {{"ate", r.truth.ate},
                {"att", r.truth.att},
                {"treated_fraction", r.truth.treated_fraction}};
  ordered_json reasons = ordered_json::object();
  for (const auto& [k, v] : r.exclusion_reasons) reasons[k] = v;
  j["replications"] = {{"requested", r.config.replications},
                       {"succeeded", r.succeeded},
                       {"excluded", r.excluded},
                       {"not_run", r.not_run},
                       {"exclusion_reasons", reasons}};
  j["interrupted"] = interrupted;
  j["mean_l1"] = jnum(r.mean_l1);
  j["clamped_probabilities"] = r.clamped_probabilities;
  ordered_json est = ordered_json::array();
  for (const auto& e : r.estimators) {
    ordered_json o;
    o["estimator"] = e.label;
    o["truth"] = jnum(e.truth);
    o["estimate"] = summary_json(e.estimate);
    o["empirical_bias"] = summary_json(e.empirical_bias);
    o["bias_c"] = summary_json(e.bias_c);
    o["bias_m"] = summary_json(e.bias_m);
    o["bias_t"] = summary_json(e.bias_t);
    o["bias_gap"] = summary_json(e.bias_gap);
    o["bias_c_oracle"] = summary_json(e.bias_c_oracle);
    o["bias_gap_oracle"] = summary_json(e.bias_gap_oracle);
    o["std_error"] = summary_json(e.std_error);
    o["ci_coverage"] = summary_json(e.ci_coverage);
    o["ci_width"] = summary_json(e.ci_width);
    o["ci_width_quantiles"] = {{"q25", jnum(e.ci_width_q25)},
                               {"median", jnum(e.ci_width_median)},
                               {"q75", jnum(e.ci_width_q75)}};
    ordered_json uis = ordered_json::array();
    for (const auto& u : e.uis) {
      uis.push_back({{"label", u.label},
                     {"coverage", summary_json(u.coverage)},
                     {"width", summary_json(u.width)},
                     {"median_width", jnum(u.median_width)},
                     {"median_width_ratio", jnum(u.median_width_ratio)}});
    }
    o["uis"] = uis;
    est.push_back(o);
  }
  j["estimators"] = est;
  return j;
}

void study_csv(const RunConfig& cfg, const sim::StudyResult& r, std::ostream& out) {
  out << csv_preamble(cfg);
  out << "replication,ok,failure,treated_fraction,l1,clamped_probabilities";
  for (const auto& key : sim::kEstimators) {
    const std::string p = sim::estimator_label(key) + "_";
    out << ',' << p << "estimate," << p << "std_error," << p << "ci_lower," << p << "ci_upper";
    for (const auto& u : r.config.uis) out << ',' << p << u.label << "_lower," << p << u.label << "_upper";
    out << ',' << p << "bias_c," << p << "bias_m," << p << "bias_t";
  }
  out << '\n';
  for (const auto& rep : r.replications) {
    if (rep.failure == "not_run") continue;
    out << rep.replication << ',' << (rep.ok ? 1 : 0) << ',' << rep.failure;
    const auto f = [&](double v) { out << ',' << (rep.ok ? num17(v) : "NA"); };
    f(rep.treated_fraction);
    f(rep.l1);
    out << ',' << rep.clamped_probabilities;
    for (const auto& e : rep.est) {
      f(e.value);
      f(e.std_error);
      f(e.ci_lower);
      f(e.ci_upper);
      for (std::size_t u = 0; u < r.config.uis.size(); ++u) {
        f(rep.ok ? e.ui_lower[u] : 0.0);
        f(rep.ok ? e.ui_upper[u] : 0.0);
      }
      f(e.bias_c);
      f(e.bias_m);
      f(e.bias_c + e.bias_m);
    }
    out << '\n';
  }
}

void study_table(const sim::StudyResult& r, std::ostream& out) {
  const auto& d = r.config.design;
  out << "design " << sim::to_string(d.design) << ", " << sim::to_string(d.overlap)
      << ", n = " << d.n << ", rho0 = " << num4(d.rho0) << ", rho1 = " << num4(d.rho1) << '\n';
  out << "replications: " << r.succeeded << " used, " << r.excluded << " excluded";
  if (r.not_run) out << ", " << r.not_run << " not run";
  out << "; true ATE " << num4(r.truth.ate) << ", ATT " << num4(r.truth.att) << "; mean L1 "
      << num4(r.mean_l1) << '\n';
  for (const auto& [k, v] : r.exclusion_reasons) out << "  excluded (" << k << "): " << v << '\n';
  TextTable t({"estimator", "interval", "coverage", "mean width", "width/CI", "emp. bias",
               "bias_C", "bias_M", "bias_T"});
  for (const auto& e : r.estimators) {
    t.add({e.label, "CI", num4(e.ci_coverage.mean), num4(e.ci_width.mean), "1",
           num4(e.empirical_bias.mean), num4(e.bias_c.mean), num4(e.bias_m.mean),
           num4(e.bias_t.mean)});
    for (const auto& u : e.uis) {
      t.add({"", u.label, num4(u.coverage.mean), num4(u.width.mean), num4(u.median_width_ratio),
             "", "", "", ""});
    }
  }
  t.print(out);
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  sim::StudyConfig sc;
  sc.design = {cfg.design, cfg.overlap, cfg.n, cfg.true_rho0, cfg.true_rho1};
  sc.replications = cfg.reps;
  sc.seed = cfg.seed;
  sc.alpha = cfg.alpha;
  sc.grid = cfg.grid;
  for (const auto& r : ui_intervals(cfg)) sc.uis.push_back({RhoPair{r, r}, cfg.alpha, ""});
  sc.variance = cfg.large_sample_var ? VarianceMethod::LargeSample : VarianceMethod::Sandwich;
  sc.clip_propensity = cfg.clip_propensity;
  sc.threads = cfg.threads;
  sc.stop = &g_interrupted;
  const sim::StudyResult r = sim::run_study(sc);
  const bool interrupted = r.not_run > 0;
  if (interrupted) err << "interrupted: writing " << (r.succeeded + r.excluded) << " finished replications\n";
  if (r.clamped_probabilities > 0) {
    err << "note: " << r.clamped_probabilities
        << " covariate Bernoulli probabilities clamped to [0.001, 0.999]\n";
  }

  if (!cfg.out_prefix.empty()) {
    std::ofstream csv(cfg.out_prefix + ".csv", std::ios::binary);
    std::ofstream json(cfg.out_prefix + ".json", std::ios::binary);
    if (!csv || !json) throw InputError("cannot write output files with prefix '" + cfg.out_prefix + "'");
    study_csv(cfg, r, csv);
    json << study_json(cfg, r, interrupted).dump(2) << '\n';
    study_table(r, out);
    return 0;
  }
  switch (cfg.format) {
    case Format::Json: out << study_json(cfg, r, interrupted).dump(2) << '\n'; break;
    case Format::Csv: study_csv(cfg, r, out); break;
    case Format::Table: study_table(r, out); break;
  }
  return 0;
}

}  // namespace

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::Estimate: return "estimate";
    case Command::Ui: return "ui";
    case Command::Sensitivity: return "sensitivity";
    case Command::Simulate: return "simulate";
  }
  return "?";
}

std::string_view to_string(Format f) noexcept {
  switch (f) {
    case Format::Json: return "json";
    case Format::Csv: return "csv";
    case Format::Table: return "table";
  }
  return "?";
}

Format parse_format(std::string_view s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  if (s == "table") return Format::Table;
  throw InputError("unknown format '" + std::string(s) + "' (expected json, csv or table)");
}

RhoInterval parse_rho_interval(std::string_view s) {
  const auto comma = s.find(',');
  const auto lo = to_double(s.substr(0, comma));
  const auto hi = comma == std::string_view::npos ? lo : to_double(s.substr(comma + 1));
  if (!lo || !hi) throw InputError("rho interval '" + std::string(s) + "' is not 'low,high'");
  if (!(*lo >= -1.0 && *hi <= 1.0 && *lo <= *hi)) {
    throw InputError("rho interval '" + std::string(s) + "' must satisfy -1 <= low <= high <= 1");
  }
  return RhoInterval(*lo, *hi);
}

sim::EstimatorKey parse_estimator(std::string_view s) {
  for (const auto& k : sim::kEstimators) {
    if (sim::estimator_label(k) == s) return k;
  }
  throw InputError("unknown estimator '" + std::string(s) +
                   "' (expected or_att, dr_att, or_ate or dr_ate)");
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
  if (grid < 2) throw InputError("--grid must be at least 2");
  if (clip_propensity && !(*clip_propensity > 0.0 && *clip_propensity < 0.5)) {
    throw InputError("--clip-propensity must lie in (0, 0.5)");
  }
  if (command == Command::Simulate) {
    if (n < 50) throw InputError("--n must be at least 50");
    if (reps < 1) throw InputError("--reps must be at least 1");
    if (std::fabs(true_rho0) > 1.0 || std::fabs(true_rho1) > 1.0) {
      throw InputError("--true-rho values must lie in [-1, 1]");
    }
    return;
  }
  if (input.empty()) throw InputError("--input is required");
  if (outcome.empty()) throw InputError("--outcome is required");
  if (treatment.empty()) throw InputError("--treatment is required");
  if (rho1 && !rho0) throw InputError("--rho1 needs --rho0");
  if (!(tol > 0.0)) throw InputError("--tol must be positive");
  if (!(plausible_rho >= 0.0 && plausible_rho <= 1.0)) {
    throw InputError("--plausible-rho must lie in [0, 1]");
  }
}

IngestedData ingest_csv(const CsvTable& table, const RunConfig& config) {
  const std::size_t yc = table.column(config.outcome);
  const std::size_t zc = table.column(config.treatment);
  const auto columns = [&](const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    std::set<std::string> seen;
    for (const auto& name : names) {
      if (!seen.insert(name).second) throw InputError("covariate '" + name + "' listed twice");
      if (name == config.outcome || name == config.treatment) {
        throw InputError("column '" + name + "' cannot be both a covariate and the " +
                         (name == config.outcome ? "outcome" : "treatment"));
      }
      idx.push_back(table.column(name));
    }
    return idx;
  };
  const std::vector<std::string> tnames =
      config.treatment_covariates.empty() ? config.covariates : config.treatment_covariates;
  const auto xc = columns(config.covariates);
  const auto tc = columns(tnames);

  const Index n = static_cast<Index>(table.rows.size());
  if (n == 0) throw InputError("input has a header but no data rows");
  const auto value = [&](Index r, std::size_t c) {
    const std::string& cell = table.rows[static_cast<std::size_t>(r)][c];
    const auto v = to_double(cell);
    const std::string where = "row " + std::to_string(r + 1) + ", column '" + table.header[c] + "'";
    if (!v) {
      if (trim(cell).empty() || trim(cell) == "NA") throw InputError("missing value at " + where);
      throw InputError("non-numeric value '" + cell + "' at " + where);
    }
    if (!std::isfinite(*v)) throw InputError("non-finite value at " + where);
    return *v;
  };

  Vector y(n), z(n);
  Matrix x(n, static_cast<Index>(xc.size())), xt(n, static_cast<Index>(tc.size()));
  for (Index r = 0; r < n; ++r) {
    y[r] = value(r, yc);
    z[r] = value(r, zc);
    if (z[r] != 0.0 && z[r] != 1.0) {
      throw InputError("treatment value '" + table.rows[static_cast<std::size_t>(r)][zc] +
                       "' at row " + std::to_string(r + 1) + ", column '" + config.treatment +
                       "' is not 0 or 1");
    }
    for (std::size_t c = 0; c < xc.size(); ++c) x(r, static_cast<Index>(c)) = value(r, xc[c]);
    for (std::size_t c = 0; c < tc.size(); ++c) xt(r, static_cast<Index>(c)) = value(r, tc[c]);
  }
  return IngestedData{Dataset(std::move(y), std::move(z), DesignMatrix::with_intercept(x)),
                      DesignMatrix::with_intercept(xt), config.covariates, tnames};
}

IngestedData ingest_csv(const std::string& path, const RunConfig& config) {
  return ingest_csv(read_csv(path), config);
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    switch (config.command) {
      case Command::Estimate: return cmd_estimate(config, out, err);
      case Command::Ui: return cmd_ui(config, out, err);
      case Command::Sensitivity: return cmd_sensitivity(config, out, err);
      case Command::Simulate: return cmd_simulate(config, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace confound_ui::cli
