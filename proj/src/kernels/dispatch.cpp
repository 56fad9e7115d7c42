#include "confound_ui/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "confound_ui/error.hpp"
#include "leaf.hpp"

namespace confound_ui::kernels {
namespace {

using detail::LeafTable;

bool cpu_has(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(CONFOUND_UI_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(CONFOUND_UI_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const LeafTable* table_for(Backend b) noexcept {
  switch (b) {
#if defined(CONFOUND_UI_HAVE_AVX2)
    case Backend::Avx2:
      return &detail::avx2_leaves();
#endif
#if defined(CONFOUND_UI_HAVE_NEON)
    case Backend::Neon:
      return &detail::neon_leaves();
#endif
    default:
      return &detail::scalar_leaves();
  }
}

Backend pick_default() noexcept {
  if (const char* env = std::getenv("CONFOUND_UI_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Backend::Scalar;
    if (want == "avx2" && cpu_has(Backend::Avx2)) return Backend::Avx2;
    if (want == "neon" && cpu_has(Backend::Neon)) return Backend::Neon;
  }
  if (cpu_has(Backend::Avx2)) return Backend::Avx2;
  if (cpu_has(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

struct State {
  std::atomic<Backend> backend{pick_default()};
  std::atomic<const LeafTable*> table{table_for(backend.load())};
};

State& state() noexcept {
  static State s;
  return s;
}

const LeafTable& leaves() noexcept {
  return *state().table.load(std::memory_order_relaxed);
}

std::size_t split_point(std::size_t n) noexcept {
  std::size_t m = (n / 2) & ~std::size_t{3};
  return m == 0 ? 4 : m;
}

double pairwise_sum(const LeafTable& t, const double* x, std::size_t n) {
  if (n <= kLeafSize) return t.sum(x, n);
  const std::size_t m = split_point(n);
  return pairwise_sum(t, x, m) + pairwise_sum(t, x + m, n - m);
}

double pairwise_dot(const LeafTable& t, const double* a, const double* b,
                    std::size_t n) {
  if (n <= kLeafSize) return t.dot(a, b, n);
  const std::size_t m = split_point(n);
  return pairwise_dot(t, a, b, m) + pairwise_dot(t, a + m, b + m, n - m);
}

double pairwise_dot3(const LeafTable& t, const double* w, const double* a,
                     const double* b, std::size_t n) {
  if (n <= kLeafSize) return t.dot3(w, a, b, n);
  const std::size_t m = split_point(n);
  return pairwise_dot3(t, w, a, b, m) +
         pairwise_dot3(t, w + m, a + m, b + m, n - m);
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

bool backend_supported(Backend b) noexcept { return cpu_has(b); }

Backend active_backend() noexcept { return state().backend.load(); }

void set_backend(Backend b) {
  if (!cpu_has(b)) {
    throw DomainError("SIMD backend '" + std::string(backend_name(b)) +
                      "' is not available on this machine/build");
  }
  state().backend.store(b);
  state().table.store(table_for(b));
}

double sum(std::span<const double> x) noexcept {
  return pairwise_sum(leaves(), x.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return pairwise_dot(leaves(), a.data(), b.data(), a.size());
}

double dot3(std::span<const double> w, std::span<const double> a,
            std::span<const double> b) noexcept {
  return pairwise_dot3(leaves(), w.data(), a.data(), b.data(), w.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  leaves().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(const ColMajorView& x, std::span<const double> beta,
          std::span<double> out) noexcept {
  const LeafTable& t = leaves();
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = 0.0;
  for (std::size_t j = 0; j < x.cols; ++j) {
    t.axpy(beta[j], x.data + j * x.ld, out.data(), x.rows);
  }
}

void gemv_t(const ColMajorView& x, std::span<const double> w,
            std::span<double> out) noexcept {
  const LeafTable& t = leaves();
  for (std::size_t j = 0; j < x.cols; ++j) {
    out[j] = pairwise_dot(t, x.data + j * x.ld, w.data(), x.rows);
  }
}

void weighted_gram(const ColMajorView& x, std::span<const double> w,
                   std::span<double> out) noexcept {
  const LeafTable& t = leaves();
  const std::size_t k = x.cols;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      const double v =
          pairwise_dot3(t, w.data(), x.data + a * x.ld, x.data + b * x.ld, x.rows);
      out[a + b * k] = v;
      out[b + a * k] = v;
    }
  }
}

}  // namespace confound_ui::kernels
