// Two float64x2 accumulators hold lanes (0,1) and (2,3) so the reduction
// order matches the four-lane scalar reference.
#include "leaf.hpp"

#include <arm_neon.h>

namespace confound_ui::kernels::detail {
namespace {

inline double combine(float64x2_t lo, float64x2_t hi) {
  const double l0 = vgetq_lane_f64(lo, 0);
  const double l1 = vgetq_lane_f64(lo, 1);
  const double l2 = vgetq_lane_f64(hi, 0);
  const double l3 = vgetq_lane_f64(hi, 1);
  return (l0 + l1) + (l2 + l3);
}

double sum_leaf(const double* x, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vld1q_f64(x + i));
    hi = vaddq_f64(hi, vld1q_f64(x + i + 2));
  }
  double s = combine(lo, hi);
  for (; i < n; ++i) s = s + x[i];
  return s;
}

double dot_leaf(const double* a, const double* b, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double s = combine(lo, hi);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

double dot3_leaf(const double* w, const double* a, const double* b,
                 std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t wa_lo = vmulq_f64(vld1q_f64(w + i), vld1q_f64(a + i));
    const float64x2_t wa_hi = vmulq_f64(vld1q_f64(w + i + 2), vld1q_f64(a + i + 2));
    lo = vaddq_f64(lo, vmulq_f64(wa_lo, vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(wa_hi, vld1q_f64(b + i + 2)));
  }
  double s = combine(lo, hi);
  for (; i < n; ++i) s = s + (w[i] * a[i]) * b[i];
  return s;
}

void axpy_leaf(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

constexpr LeafTable kNeon{sum_leaf, dot_leaf, dot3_leaf, axpy_leaf};

}  // namespace

const LeafTable& neon_leaves() noexcept { return kNeon; }

}  // namespace confound_ui::kernels::detail
