#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "confound_ui/error.hpp"
#include "confound_ui/simulation.hpp"

namespace confound_ui::sim {
namespace {

std::string failure_category(const std::exception& e) {
  if (dynamic_cast<const InfeasibleRhoError*>(&e)) return "infeasible_rho";
  if (dynamic_cast<const SingularityError*>(&e)) return "singular";
  if (dynamic_cast<const DegenerateTreatmentError*>(&e)) return "degenerate_treatment";
  if (dynamic_cast<const OverlapError*>(&e)) return "overlap";
  if (dynamic_cast<const DecompositionError*>(&e)) return "decomposition";
  return "error";
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  const std::size_t m = v.size();
  if (m == 0) {
    s.mean = s.mc_se = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = kernels::sum(v) / static_cast<double>(m);
  if (m < 2) {
    s.mc_se = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::vector<double> sq(m);
  for (std::size_t i = 0; i < m; ++i) sq[i] = (v[i] - s.mean) * (v[i] - s.mean);
  const double var = kernels::sum(sq) / static_cast<double>(m - 1);
  s.mc_se = std::sqrt(var / static_cast<double>(m));
  return s;
}

// Type 7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string format_rho(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace

std::string estimator_label(const EstimatorKey& k) {
  std::string s = k.estimator == Estimator::OR ? "or_" : "dr_";
  s += k.estimand == Estimand::ATT ? "att" : "ate";
  return s;
}

std::string default_ui_label(const UiSpec& spec) {
  const RhoInterval& a = spec.rho.rho0;
  const RhoInterval& b = spec.rho.rho1;
  std::string s = "ui_" + format_rho(a.low) + "_" + format_rho(a.high);
  if (a.low != b.low || a.high != b.high) s += "_" + format_rho(b.low) + "_" + format_rho(b.high);
  return s;
}

int resolve_threads(int requested) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CONFOUND_UI_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) n = static_cast<int>(v);
  }
  if (requested > 0) n = std::min(n, requested);
  return std::max(1, n);
}

ReplicationRecord run_replication(const StudyConfig& config, const PopulationTruth& truth,
                                  int replication) {
  (void)truth;
  ReplicationRecord rec;
  rec.replication = replication;
  const SimulationDesign& design = config.design;
  try {
    SimulatedData sim =
        generate(design, RngSeed{config.seed, static_cast<std::uint64_t>(replication)});
    rec.clamped_probabilities = sim.clamped_probabilities;
    FitOptions opts;
    opts.clip_propensity = config.clip_propensity;
    FittedModels models = fit_models(sim.data, opts);
    if (models.probit->separation) {
      rec.failure = "separation";
      rec.message = "probit separation detected";
      return rec;
    }
    if (!models.probit->converged) {
      rec.failure = "probit_not_converged";
      rec.message = "probit did not converge";
      return rec;
    }
    rec.clipped_propensities = models.clipped_rows;
    rec.treated_fraction = static_cast<double>(sim.data.n1()) / static_cast<double>(sim.data.n());
    rec.l1 = l1_imbalance_by_arm(models.propensity, sim.data.z());
    const MisspecificationBias bm = bias_m_or(sim.data, models, sim.f0, sim.f1);

    auto analysis = std::make_shared<const Analysis>(Analysis{std::move(sim.data), std::move(models)});
    const Dataset& data = analysis->data;
    const FittedModels& fitted = analysis->models;
    for (int k = 0; k < 4; ++k) {
      const EstimatorKey key = kEstimators[k];
      EstimatorRecord& er = rec.est[k];
      EffectEstimate e;
      e.estimand = key.estimand;
      e.estimator = key.estimator;
      e.value = point_estimate(data, fitted, key.estimand, key.estimator);
      const VarianceResult vr =
          estimator_variance(data, fitted, key.estimand, key.estimator, config.variance);
      rec.ill_conditioned = rec.ill_conditioned || vr.ill_conditioned;
      e.std_error = std::sqrt(vr.variance);
      e.source = analysis;
      er.value = e.value;
      er.std_error = e.std_error;
      const Interval ci = confidence_interval(e, config.alpha);
      er.ci_lower = ci.lower;
      er.ci_upper = ci.upper;
      for (const UiSpec& spec : config.uis) {
        const UncertaintyInterval ui = uncertainty_interval(e, spec.rho, spec.alpha, config.grid);
        er.ui_lower.push_back(ui.lower);
        er.ui_upper.push_back(ui.upper);
      }
      const BiasModel bias(data, fitted, key.estimand, key.estimator);
      er.bias_c = bias.bias(design.rho0, design.rho1);
      er.bias_c_oracle = design.rho0 * bias.coefficient(Arm::Control) +
                         (bias.uses_arm(Arm::Treated) ? design.rho1 * bias.coefficient(Arm::Treated)
                                                      : 0.0);
      if (key.estimator == Estimator::OR) er.bias_m = key.estimand == Estimand::ATT ? bm.att : bm.ate;
    }
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.failure = failure_category(e);
    rec.message = e.what();
    for (auto& er : rec.est) er = EstimatorRecord{};
  }
  return rec;
}

void aggregate(StudyResult& result) {
  const StudyConfig& cfg = result.config;
  result.succeeded = 0;
  result.excluded = 0;
  result.not_run = 0;
  result.exclusion_reasons.clear();
  result.clamped_probabilities = 0;
  std::vector<double> l1s;
  for (const auto& r : result.replications) {
    result.clamped_probabilities += r.clamped_probabilities;
    if (r.ok) {
      ++result.succeeded;
      l1s.push_back(r.l1);
    } else if (r.failure == "not_run") {
      ++result.not_run;
    } else {
      ++result.excluded;
      ++result.exclusion_reasons[r.failure];
    }
  }
  result.mean_l1 = summarize(l1s).mean;

  for (int k = 0; k < 4; ++k) {
    const EstimatorKey key = kEstimators[k];
    EstimatorAggregate& agg = result.estimators[k];
    agg = EstimatorAggregate{};
    agg.label = estimator_label(key);
    agg.truth = key.estimand == Estimand::ATT ? result.truth.att : result.truth.ate;
    std::vector<double> value, err, bc, bmv, bt, gap, bco, gapo, se, cover, width;
    std::vector<std::vector<double>> ui_cover(cfg.uis.size()), ui_width(cfg.uis.size()),
        ui_ratio(cfg.uis.size());
    for (const auto& r : result.replications) {
      if (!r.ok) continue;
      const EstimatorRecord& e = r.est[k];
      value.push_back(e.value);
      err.push_back(e.value - agg.truth);
      bc.push_back(e.bias_c);
      bmv.push_back(e.bias_m);
      bt.push_back(e.bias_c + e.bias_m);
      gap.push_back(e.value - agg.truth - (e.bias_c + e.bias_m));
      bco.push_back(e.bias_c_oracle);
      gapo.push_back(e.value - agg.truth - (e.bias_c_oracle + e.bias_m));
      se.push_back(e.std_error);
      cover.push_back(e.ci_lower <= agg.truth && agg.truth <= e.ci_upper ? 1.0 : 0.0);
      const double ci_w = e.ci_upper - e.ci_lower;
      width.push_back(ci_w);
      for (std::size_t u = 0; u < cfg.uis.size(); ++u) {
        const double lo = e.ui_lower[u];
        const double hi = e.ui_upper[u];
        ui_cover[u].push_back(lo <= agg.truth && agg.truth <= hi ? 1.0 : 0.0);
        ui_width[u].push_back(hi - lo);
        ui_ratio[u].push_back(ci_w > 0.0 ? (hi - lo) / ci_w
                                         : std::numeric_limits<double>::quiet_NaN());
      }
    }
    agg.estimate = summarize(value);
    agg.empirical_bias = summarize(err);
    agg.bias_c = summarize(bc);
    agg.bias_m = summarize(bmv);
    agg.bias_t = summarize(bt);
    agg.bias_gap = summarize(gap);
    agg.bias_c_oracle = summarize(bco);
    agg.bias_gap_oracle = summarize(gapo);
    agg.std_error = summarize(se);
    agg.ci_coverage = summarize(cover);
    agg.ci_width = summarize(width);
    agg.ci_width_q25 = quantile(width, 0.25);
    agg.ci_width_median = quantile(width, 0.5);
    agg.ci_width_q75 = quantile(width, 0.75);
    for (std::size_t u = 0; u < cfg.uis.size(); ++u) {
      UiAggregate ua;
      ua.label = cfg.uis[u].label.empty() ? default_ui_label(cfg.uis[u]) : cfg.uis[u].label;
      ua.coverage = summarize(ui_cover[u]);
      ua.width = summarize(ui_width[u]);
      ua.median_width = quantile(ui_width[u], 0.5);
      ua.median_width_ratio = quantile(ui_ratio[u], 0.5);
      agg.uis.push_back(std::move(ua));
    }
  }
}

StudyResult run_study(const StudyConfig& config) {
  if (config.replications < 1) throw DomainError("a study needs at least one replication");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  config.design.validate();
  StudyResult result;
  result.config = config;
  for (UiSpec& u : result.config.uis) {
    if (u.label.empty()) u.label = default_ui_label(u);
  }
  result.truth = population_truth(config.design);
  result.replications.resize(static_cast<std::size_t>(config.replications));
  for (int r = 0; r < config.replications; ++r) {
    result.replications[static_cast<std::size_t>(r)].replication = r;
    result.replications[static_cast<std::size_t>(r)].failure = "not_run";
  }

  const int threads = std::min(resolve_threads(config.threads), config.replications);
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int r = next++; r < config.replications; r = next++) {
      if (config.stop && config.stop->load()) break;
      result.replications[static_cast<std::size_t>(r)] =
          run_replication(result.config, result.truth, r);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  aggregate(result);
  return result;
}

}  // namespace confound_ui::sim
