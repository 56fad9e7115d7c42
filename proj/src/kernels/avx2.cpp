// Compiled with -mavx2 only; -mfma is deliberately absent so that the
// multiply and add round separately, exactly as in the scalar reference.
#include "leaf.hpp"

#include <immintrin.h>

namespace confound_ui::kernels::detail {
namespace {

inline double combine(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum_leaf(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = combine(acc);
  for (; i < n; ++i) s = s + x[i];
  return s;
}

double dot_leaf(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                           _mm256_loadu_pd(b + i)));
  }
  double s = combine(acc);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

double dot3_leaf(const double* w, const double* a, const double* b,
                 std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wa =
        _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(wa, _mm256_loadu_pd(b + i)));
  }
  double s = combine(acc);
  for (; i < n; ++i) s = s + (w[i] * a[i]) * b[i];
  return s;
}

void axpy_leaf(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i,
                     _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

constexpr LeafTable kAvx2{sum_leaf, dot_leaf, dot3_leaf, axpy_leaf};

}  // namespace

const LeafTable& avx2_leaves() noexcept { return kAvx2; }

}  // namespace confound_ui::kernels::detail
