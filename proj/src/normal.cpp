#include <cmath>
#include <numbers>
#include <string>

#include "confound_ui/error.hpp"
#include "confound_ui/stat_core.hpp"

namespace confound_ui {
namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;
constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176;
constexpr double kMillsSwitch = 8.0;

// Upper-tail Mills ratio inverse: phi(x) / (1 - Phi(x)) for x > 8, from the
// continued fraction R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))). 120 terms
// converge to full precision on this range.
double mills_upper_cf(double x) noexcept {
  double t = x;
  for (int k = 120; k >= 1; --k) t = x + k / t;
  return t;
}

// Wichura (1988), algorithm AS 241, PPND16. Lower-half input only.
double ppnd16(double p) noexcept {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = std::sqrt(-std::log(p));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return -val;
}

}  // namespace

double normal_pdf(double t) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double normal_cdf(double t) noexcept { return 0.5 * std::erfc(-t * kInvSqrt2); }

double normal_sf(double t) noexcept { return 0.5 * std::erfc(t * kInvSqrt2); }

double normal_log_cdf(double t) noexcept {
  if (t > -kMillsSwitch) return std::log(normal_cdf(t));
  // log Phi(t) = log phi(t) - log lambda_1(t)
  return -0.5 * t * t - kLogSqrt2Pi - std::log(mills_upper_cf(-t));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: probability must lie strictly inside "
                      "(0, 1), got " + std::to_string(p));
  }
  // Work in the lower half where 1 - p is exact, then reflect.
  const bool upper = p > 0.5;
  const double lp = upper ? 1.0 - p : p;
  double x = ppnd16(lp);
  // One Newton step on Phi(x) = lp.
  const double dens = normal_pdf(x);
  if (dens > 0.0) x -= (normal_cdf(x) - lp) / dens;
  return upper ? -x : x;
}

double inverse_mills(double t, Arm arm) noexcept {
  // lambda_0(t) = lambda_1(-t); both branches evaluate the same expression.
  const double s = arm == Arm::Treated ? t : -t;
  if (s < -kMillsSwitch) return mills_upper_cf(-s);
  return normal_pdf(s) / normal_cdf(s);
}

}  // namespace confound_ui
