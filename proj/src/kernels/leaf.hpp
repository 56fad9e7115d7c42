#pragma once

#include <cstddef>

namespace confound_ui::kernels::detail {

// Leaf kernels operate on at most kLeafSize elements (axpy is unbounded).
struct LeafTable {
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*dot3)(const double* w, const double* a, const double* b,
                 std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const LeafTable& scalar_leaves() noexcept;
#if defined(CONFOUND_UI_HAVE_AVX2)
const LeafTable& avx2_leaves() noexcept;
#endif
#if defined(CONFOUND_UI_HAVE_NEON)
const LeafTable& neon_leaves() noexcept;
#endif

}  // namespace confound_ui::kernels::detail
