#include "leaf.hpp"

namespace confound_ui::kernels::detail {
namespace {

double sum_leaf(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int k = 0; k < 4; ++k) acc[k] = acc[k] + x[i + k];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) s = s + x[i];
  return s;
}

double dot_leaf(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int k = 0; k < 4; ++k) acc[k] = acc[k] + a[i + k] * b[i + k];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

double dot3_leaf(const double* w, const double* a, const double* b,
                 std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int k = 0; k < 4; ++k) acc[k] = acc[k] + (w[i + k] * a[i + k]) * b[i + k];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) s = s + (w[i] * a[i]) * b[i];
  return s;
}

void axpy_leaf(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

constexpr LeafTable kScalar{sum_leaf, dot_leaf, dot3_leaf, axpy_leaf};

}  // namespace

const LeafTable& scalar_leaves() noexcept { return kScalar; }

}  // namespace confound_ui::kernels::detail
