#pragma once

// Data-parallel reductions used by every row-wise loop in the library.
//
// Each kernel has a scalar reference and optional AVX2 / NEON variants chosen
// at runtime. All variants follow the same rounding sequence: four lane
// accumulators over blocks of four elements, combined as (l0+l1)+(l2+l3), then
// the tail added left to right. Longer inputs are split pairwise down to leaves
// of at most kLeafSize elements. Variants therefore agree bit for bit, which is
// what makes study output reproducible across machines.

#include <cstddef>
#include <span>
#include <string_view>

namespace confound_ui::kernels {

enum class Backend { Scalar, Avx2, Neon };

inline constexpr std::size_t kLeafSize = 128;

std::string_view backend_name(Backend b) noexcept;
bool backend_supported(Backend b) noexcept;

// Backend picked on first use: CONFOUND_UI_SIMD=scalar|avx2|neon|auto, else
// the widest one the CPU supports.
Backend active_backend() noexcept;

// Throws DomainError if the CPU or build lacks the backend.
void set_backend(Backend b);

// Column-major matrix view; column j starts at data + j * ld.
struct ColMajorView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t ld;

  std::span<const double> col(std::size_t j) const noexcept {
    return {data + j * ld, rows};
  }
};

double sum(std::span<const double> x) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;
// sum_i (w_i * a_i) * b_i
double dot3(std::span<const double> w, std::span<const double> a,
            std::span<const double> b) noexcept;
// y_i <- y_i + alpha * x_i
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
// out <- X * beta, accumulated column by column.
void gemv(const ColMajorView& x, std::span<const double> beta,
          std::span<double> out) noexcept;
// out_j <- dot(X.col(j), w)
void gemv_t(const ColMajorView& x, std::span<const double> w,
            std::span<double> out) noexcept;
// out(a, b) <- dot3(w, X.col(a), X.col(b)); out is cols x cols column-major.
void weighted_gram(const ColMajorView& x, std::span<const double> w,
                   std::span<double> out) noexcept;

}  // namespace confound_ui::kernels
