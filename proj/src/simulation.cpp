#include "confound_ui/simulation.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cctype>
#include <cfloat>
#include <cmath>
#include <limits>

#include "confound_ui/error.hpp"

namespace confound_ui::sim {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double clamp_probability(double p, Index& clamped) {
  const double c = std::clamp(p, kProbabilityFloor, kProbabilityCeil);
  clamped += c != p;
  return c;
}

Matrix error_correlation(double rho0, double rho1) {
  Matrix c(3, 3);
  c << 1.0, rho0, rho1,
       rho0, 1.0, rho0 * rho1,
       rho1, rho0 * rho1, 1.0;
  return c;
}

std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

std::string_view to_string(Design d) noexcept {
  switch (d) {
    case Design::A: return "A";
    case Design::B: return "B";
    case Design::C: return "C";
    case Design::D: return "D";
  }
  return "?";
}

std::string_view to_string(Overlap o) noexcept {
  return o == Overlap::LowL1 ? "low_L1" : "high_L1";
}

Design parse_design(std::string_view s) {
  const std::string v = lower(s);
  if (v == "a") return Design::A;
  if (v == "b") return Design::B;
  if (v == "c") return Design::C;
  if (v == "d") return Design::D;
  throw InputError("unknown design '" + std::string(s) + "' (expected A, B, C or D)");
}

Overlap parse_overlap(std::string_view s) {
  const std::string v = lower(s);
  if (v == "low" || v == "low_l1") return Overlap::LowL1;
  if (v == "high" || v == "high_l1") return Overlap::HighL1;
  throw InputError("unknown overlap '" + std::string(s) + "' (expected low or high)");
}

void SimulationDesign::validate() const {
  if (n < 50) throw DomainError("simulation sample size must be at least 50");
  if (!(std::fabs(rho0) <= 1.0 && std::fabs(rho1) <= 1.0)) {
    throw DomainError("simulation rho values must lie in [-1, 1]");
  }
  psd_factor(error_correlation(rho0, rho1));
}

Vector design_gamma(Design d, Overlap o) {
  const bool low = o == Overlap::LowL1;
  if (d == Design::A || d == Design::B) {
    return low ? Vector{{-0.27, 0.3}} : Vector{{-0.3, 0.65}};
  }
  return low ? Vector{{-0.27, 0.2, -0.15, 0.05, 0.15, -0.1}}
             : Vector{{-0.3, 0.5, -0.25, 0.15, 0.25, -0.15}};
}

Index design_covariates(Design d) noexcept {
  return d == Design::A || d == Design::B ? 1 : 5;
}

// Gaps at x == 2 (h0) and x == 3 (h1) fall to the preceding branch.
double h0(double x) noexcept {
  if (x < -1.5) return 0.15 - x - 0.4 * x * x;
  if (x < 1.0) return 1.5 - x + 0.5 * x * x + x * x * x;
  if (x <= 2.0) return 1.75 - 0.25 * x + 0.5 * x * x;
  return 2.25 + 0.5 * x;
}

double h1(double x) noexcept {
  if (x < -1.0) return 0.2 * x - 0.1 * x * x;
  if (x < 1.0) return 0.3 * x;
  if (x <= 3.0) return 0.4 - 0.1 * x * x;
  return -0.2 - 0.1 * x;
}

double f0(Design d, const double* x) noexcept {
  switch (d) {
    case Design::A: return 0.5 + 0.5 * x[0];
    case Design::B: return h0(x[0]);
    case Design::C:
      return -0.5 + 0.5 * x[0] + 1.0 * x[1] + 0.5 * x[2] - 1.0 * x[3] + 1.0 * x[4];
    case Design::D: {
      const double h = h1(x[0]);
      return h + 0.1 * x[1] - 0.3 * x[2] - 0.6 * h * x[3] - 0.1 * x[4];
    }
  }
  return 0.0;
}

double f1(Design d, const double* x) noexcept {
  switch (d) {
    case Design::A: return 2.5 + 1.5 * x[0];
    case Design::B: return h1(x[0]);
    case Design::C: return 1.5 - 1.5 * x[0] + 4.0 * x[1] - 1.5 * x[2] + 3.0 * x[4];
    case Design::D: {
      const double h = h0(x[0]);
      return h + h * x[1] + 0.3 * x[1] - 0.2 * x[2] - 0.4 * x[3] + 0.6 * x[4];
    }
  }
  return 0.0;
}

SimulatedData generate(const SimulationDesign& design, RngSeed seed) {
  design.validate();
  const Index n = design.n;
  const Index p = design_covariates(design.design);
  const Vector gamma = design_gamma(design.design, design.overlap);
  Rng rng(seed);

  Matrix cov(n, p);
  Index clamped = 0;
  for (Index i = 0; i < n; ++i) {
    if (p == 1) {
      cov(i, 0) = rng.normal();
      continue;
    }
    const double x1 = rng.normal();
    const double x2 = rng.bernoulli(clamp_probability(0.5 + 0.05 * x1, clamped)) ? 1.0 : 0.0;
    const double u3 = rng.uniform(-0.5, 0.5);
    const double x3 = 0.015 * x1 + u3;
    const double x4 = rng.bernoulli(clamp_probability(0.4 + 0.2 * x3, clamped)) ? 1.0 : 0.0;
    const double u5 = rng.normal();
    const double x5 = 0.04 * x1 + 0.15 * x2 + 0.05 * x3 + u5;
    cov(i, 0) = x1;
    cov(i, 1) = x2;
    cov(i, 2) = x3;
    cov(i, 3) = x4;
    cov(i, 4) = x5;
  }

  // columns: eta, eps0, eps1
  const Matrix err = sample_mvn(Vector::Zero(3), error_correlation(design.rho0, design.rho1), rng, n);

  DesignMatrix x = DesignMatrix::with_intercept(cov);
  Vector g(n);
  kernels::gemv(x.view(), span_of(gamma), {g.data(), static_cast<std::size_t>(n)});
  Vector y(n), z(n), tf0(n), tf1(n), ps(n);
  std::array<double, 5> row{};
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < p; ++c) row[static_cast<std::size_t>(c)] = cov(i, c);
    tf0[i] = f0(design.design, row.data());
    tf1[i] = f1(design.design, row.data());
    ps[i] = normal_cdf(g[i]);
    z[i] = g[i] + err(i, 0) > 0.0 ? 1.0 : 0.0;
    y[i] = z[i] == 1.0 ? tf1[i] + err(i, 2) : tf0[i] + err(i, 1);
  }
  return SimulatedData{Dataset(std::move(y), std::move(z), std::move(x)), std::move(tf0),
                       std::move(tf1), std::move(ps), clamped};
}

// ---------------------------------------------------------------------------
// Population truth
//
// With m = gamma'x the expectations needed are E(f1 - f0), E((f1 - f0) Phi(m)),
// E Phi(m) and E phi(m); then
//   ATE = E(f1 - f0)
//   ATT = [E((f1 - f0) Phi(m)) + (rho1 - rho0) E phi(m)] / E Phi(m).
// In designs C/D the x5 noise u5 ~ N(0, 1) enters f1 - f0 and m linearly and
// is integrated in closed form; x2 and x4 are summed out, and what remains is
// a 2-d integral over x1 ~ N(0, 1) and u3 ~ U(-1/2, 1/2).

namespace {

struct Moments {
  double diff = 0.0;
  double diff_phi_cdf = 0.0;
  double cdf = 0.0;
  double pdf = 0.0;
};

Moments moments_ab(Design d, const Vector& gamma, double x1) {
  const double diff = f1(d, &x1) - f0(d, &x1);
  const double m = gamma[0] + gamma[1] * x1;
  const double cdf = normal_cdf(m);
  return {diff, diff * cdf, cdf, normal_pdf(m)};
}

Moments moments_cd(Design d, const Vector& gamma, double x1, double u3) {
  Moments out;
  const double x3 = 0.015 * x1 + u3;
  const double p2 = std::clamp(0.5 + 0.05 * x1, kProbabilityFloor, kProbabilityCeil);
  const double p4 = std::clamp(0.4 + 0.2 * x3, kProbabilityFloor, kProbabilityCeil);
  const double g5 = gamma[5];
  const double s = std::sqrt(1.0 + g5 * g5);
  for (int x2 = 0; x2 <= 1; ++x2) {
    for (int x4 = 0; x4 <= 1; ++x4) {
      const double w = (x2 ? p2 : 1.0 - p2) * (x4 ? p4 : 1.0 - p4);
      const double c5 = 0.04 * x1 + 0.15 * x2 + 0.05 * x3;
      // f1 - f0 = a + b * x5; evaluate at x5 = 0 and x5 = 1 to split it.
      double row[5] = {x1, static_cast<double>(x2), x3, static_cast<double>(x4), 0.0};
      const double a = f1(d, row) - f0(d, row);
      row[4] = 1.0;
      const double b = f1(d, row) - f0(d, row) - a;
      const double mean_diff = a + b * c5;
      const double m = gamma[0] + gamma[1] * x1 + gamma[2] * x2 + gamma[3] * x3 +
                       gamma[4] * x4 + g5 * c5;
      const double t = m / s;
      const double cdf = normal_cdf(t);
      const double pdf = normal_pdf(t) / s;
      out.diff += w * mean_diff;
      out.diff_phi_cdf += w * (mean_diff * cdf + b * g5 * pdf);
      out.cdf += w * cdf;
      out.pdf += w * pdf;
    }
  }
  return out;
}

template <class F>
double integrate_normal(F&& f) {
  using boost::math::quadrature::gauss_kronrod;
  // Branch points of h0/h1 and of the clamp on Pr(x2 = 1).
  static constexpr double kBreaks[] = {-9.98, -1.5, -1.0, 1.0, 2.0, 3.0, 9.98};
  const auto weighted = [&](double x) { return f(x) * normal_pdf(x); };
  const double inf = std::numeric_limits<double>::infinity();
  double total = gauss_kronrod<double, 61>::integrate(weighted, -inf, kBreaks[0], 15, 1e-13);
  for (std::size_t i = 0; i + 1 < std::size(kBreaks); ++i) {
    total += gauss_kronrod<double, 61>::integrate(weighted, kBreaks[i], kBreaks[i + 1], 15, 1e-13);
  }
  total += gauss_kronrod<double, 61>::integrate(weighted, kBreaks[std::size(kBreaks) - 1], inf,
                                                15, 1e-13);
  return total;
}

}  // namespace

PopulationTruth population_truth(const SimulationDesign& design) {
  const Design d = design.design;
  const Vector gamma = design_gamma(d, design.overlap);
  const bool cd = design_covariates(d) == 5;

  const auto moments_at = [&](double x1) {
    if (!cd) return moments_ab(d, gamma, x1);
    // The u3 integrand is smooth; fixed Gauss-Legendre is exact to rounding.
    Moments acc;
    const auto& nodes = boost::math::quadrature::gauss<double, 30>::abscissa();
    const auto& weights = boost::math::quadrature::gauss<double, 30>::weights();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        if (k == 0 && sign > 0.0 && nodes[0] == 0.0) continue;
        const double u3 = 0.5 * sign * nodes[k];
        const Moments m = moments_cd(d, gamma, x1, u3);
        const double w = 0.5 * weights[k];
        acc.diff += w * m.diff;
        acc.diff_phi_cdf += w * m.diff_phi_cdf;
        acc.cdf += w * m.cdf;
        acc.pdf += w * m.pdf;
      }
    }
    return acc;
  };

  const double e_diff = integrate_normal([&](double x) { return moments_at(x).diff; });
  const double e_diff_cdf = integrate_normal([&](double x) { return moments_at(x).diff_phi_cdf; });
  const double e_cdf = integrate_normal([&](double x) { return moments_at(x).cdf; });
  const double e_pdf = integrate_normal([&](double x) { return moments_at(x).pdf; });

  PopulationTruth t;
  t.ate = e_diff;
  t.treated_fraction = e_cdf;
  t.att = (e_diff_cdf + (design.rho1 - design.rho0) * e_pdf) / e_cdf;
  return t;
}

// ---------------------------------------------------------------------------
// L1 imbalance

// R's R_pretty() with high.u.bias = 1.5, u5.bias = .5 + 1.5 * 1.5, min.n = 1,
// eps.correct = 0, as called by hist().
std::vector<double> sturges_breaks(double lo, double up, std::size_t count) {
  if (!(std::isfinite(lo) && std::isfinite(up) && lo <= up)) {
    throw InputError("histogram range must be finite");
  }
  const int ndiv = static_cast<int>(std::ceil(std::log2(static_cast<double>(count)) + 1.0));
  constexpr double h = 1.5;
  constexpr double h5 = 0.5 + 1.5 * h;
  constexpr double rounding_eps = 1e-10;
  constexpr int min_n = 1;

  const double dx = up - lo;
  double cell;
  bool small;
  if (dx == 0.0 && up == 0.0) {
    cell = 1.0;
    small = true;
  } else {
    cell = std::max(std::fabs(lo), std::fabs(up));
    double u = 1.0 + (h5 >= 1.5 * h + 0.5 ? 1.0 / (1.0 + h) : 1.5 / (1.0 + h5));
    u *= std::max(1, ndiv) * DBL_EPSILON;
    small = dx < cell * u * 3.0;
  }
  if (small) {
    if (cell > 10.0) cell = 9.0 + cell / 10.0;
    cell *= 0.75;
    if (min_n > 1) cell /= min_n;
  } else {
    cell = dx;
    if (ndiv > 1) cell /= ndiv;
  }
  const double base = std::pow(10.0, std::floor(std::log10(cell)));
  double unit = base;
  double ns = 2.0 * base;
  if (ns - cell < h * (cell - unit)) {
    unit = ns;
    ns = 5.0 * base;
    if (ns - cell < h5 * (cell - unit)) {
      unit = ns;
      ns = 10.0 * base;
      if (ns - cell < h * (cell - unit)) unit = ns;
    }
  }
  double lo_k = std::floor(lo / unit + rounding_eps);
  double up_k = std::ceil(up / unit - rounding_eps);
  while (lo_k * unit > lo + rounding_eps * unit) lo_k -= 1.0;
  while (up_k * unit < up - rounding_eps * unit) up_k += 1.0;
  int k = static_cast<int>(0.5 + up_k - lo_k);
  if (k < min_n) {
    const int extra = min_n - k;
    if (lo_k >= 0.0) {
      up_k += extra / 2;
      lo_k -= extra / 2 + extra % 2;
    } else {
      lo_k -= extra / 2;
      up_k += extra / 2 + extra % 2;
    }
    k = min_n;
  }
  const double from = lo_k * unit;
  const double to = up_k * unit;
  std::vector<double> breaks(static_cast<std::size_t>(k) + 1);
  const double by = (to - from) / k;
  for (int i = 0; i <= k; ++i) breaks[static_cast<std::size_t>(i)] = from + i * by;
  breaks.back() = to;
  return breaks;
}

namespace {

// Right-closed bins with the lowest break included and hist()'s 1e-7 fuzz.
std::vector<double> bin_proportions(const Vector& v, const std::vector<double>& breaks) {
  std::vector<double> diffs(breaks.size() - 1);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) diffs[i] = breaks[i + 1] - breaks[i];
  std::vector<double> sorted = diffs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  const double fuzz = 1e-7 * median;
  std::vector<double> fb(breaks);
  fb[0] -= fuzz;
  for (std::size_t i = 1; i < fb.size(); ++i) fb[i] += fuzz;

  std::vector<double> counts(diffs.size(), 0.0);
  for (Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (x < fb.front() || x > fb.back()) continue;
    // first break >= x, bin is the interval ending there
    auto it = std::lower_bound(fb.begin() + 1, fb.end(), x);
    counts[static_cast<std::size_t>(it - fb.begin() - 1)] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(v.size());
  return counts;
}

}  // namespace

double l1_imbalance(const Vector& ps_treated, const Vector& ps_control) {
  if (ps_treated.size() == 0 || ps_control.size() == 0) {
    throw InputError("L1 imbalance needs at least one treated and one control score");
  }
  const double lo = std::min(ps_treated.minCoeff(), ps_control.minCoeff());
  const double hi = std::max(ps_treated.maxCoeff(), ps_control.maxCoeff());
  const auto breaks =
      sturges_breaks(lo, hi, static_cast<std::size_t>(ps_treated.size() + ps_control.size()));
  const auto ft = bin_proportions(ps_treated, breaks);
  const auto fc = bin_proportions(ps_control, breaks);
  double l1 = 0.0;
  for (std::size_t i = 0; i < ft.size(); ++i) l1 += std::fabs(ft[i] - fc[i]);
  return 0.5 * l1;
}

double l1_imbalance_by_arm(const Vector& propensity, const Vector& z) {
  return l1_imbalance(select_rows(propensity, z, 1.0), select_rows(propensity, z, 0.0));
}

// ---------------------------------------------------------------------------

MisspecificationBias bias_m_or(const Dataset& data, const FittedModels& models, const Vector& tf0,
                               const Vector& tf1) {
  const Matrix& x = data.x().values();
  const Vector& z = data.z();
  const Matrix x0 = select_rows(x, z, 0.0);
  const Matrix x1 = select_rows(x, z, 1.0);
  // Pi_j f = (X_j'X_j)^{-1} X_j' f on arm-j rows
  const Vector pi0_f0 = models.ols0.gram_inverse * (x0.transpose() * select_rows(tf0, z, 0.0));
  const Vector pi1_f1 = models.ols1.gram_inverse * (x1.transpose() * select_rows(tf1, z, 1.0));
  const Vector xbar1 = x1.colwise().mean();
  const Vector f0_treated = select_rows(tf0, z, 1.0);
  const Vector f1_control = select_rows(tf1, z, 0.0);

  MisspecificationBias out;
  out.att = kernels::sum(span_of(f0_treated)) / static_cast<double>(f0_treated.size()) -
            pi0_f0.dot(xbar1);
  const double n = static_cast<double>(data.n());
  const Vector sum1 = x1.colwise().sum();
  const Vector sum0 = x0.colwise().sum();
  out.ate = (kernels::sum(span_of(f0_treated)) - sum1.dot(pi0_f0) -
             kernels::sum(span_of(f1_control)) + sum0.dot(pi1_f1)) /
            n;
  return out;
}

}  // namespace confound_ui::sim
