#include <doctest.h>

#include <random>
#include <vector>

#include "confound_ui/kernels.hpp"

namespace k = confound_ui::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1e3);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(gen);
  return v;
}

struct Outputs {
  std::vector<double> scalars;
  std::vector<double> vectors;
};

Outputs run_all(std::size_t n, std::size_t cols) {
  Outputs o;
  const auto a = noise(n, 1), b = noise(n, 2), w = noise(n, 3);
  const auto xm = noise(n * cols, 4);
  // Offset views exercise unaligned loads.
  o.scalars.push_back(k::sum(a));
  o.scalars.push_back(k::dot(a, b));
  o.scalars.push_back(k::dot3(w, a, b));
  if (n > 1) o.scalars.push_back(k::sum(std::span<const double>(a).subspan(1)));
  std::vector<double> y = b;
  k::axpy(0.37, a, y);
  o.vectors.insert(o.vectors.end(), y.begin(), y.end());
  const k::ColMajorView view{xm.data(), n, cols, n};
  const auto beta = noise(cols, 5);
  std::vector<double> out(n), outt(cols), g(cols * cols);
  k::gemv(view, beta, out);
  k::gemv_t(view, w, outt);
  k::weighted_gram(view, w, g);
  for (auto* v : {&out, &outt, &g}) o.vectors.insert(o.vectors.end(), v->begin(), v->end());
  return o;
}

}  // namespace

TEST_CASE("every supported backend reproduces the scalar kernels bit for bit") {
  const k::Backend original = k::active_backend();
  for (const k::Backend b : {k::Backend::Avx2, k::Backend::Neon}) {
    if (!k::backend_supported(b)) continue;
    CAPTURE(k::backend_name(b));
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 15u, 127u, 128u, 129u, 255u, 256u, 1000u, 4099u}) {
      CAPTURE(n);
      k::set_backend(k::Backend::Scalar);
      const Outputs ref = run_all(n, 5);
      k::set_backend(b);
      const Outputs got = run_all(n, 5);
      REQUIRE(ref.scalars.size() == got.scalars.size());
      for (std::size_t i = 0; i < ref.scalars.size(); ++i) CHECK(ref.scalars[i] == got.scalars[i]);
      REQUIRE(ref.vectors.size() == got.vectors.size());
      bool same = true;
      for (std::size_t i = 0; i < ref.vectors.size(); ++i) same = same && ref.vectors[i] == got.vectors[i];
      CHECK(same);
    }
  }
  k::set_backend(original);
}

TEST_CASE("scalar kernels are accurate") {
  std::vector<double> ones(1000, 0.1);
  CHECK(k::sum(ones) == doctest::Approx(100.0).epsilon(1e-14));
  std::vector<double> a = {1, 2, 3, 4, 5}, b = {5, 4, 3, 2, 1}, w = {1, 0, 1, 0, 1};
  k::set_backend(k::Backend::Scalar);
  CHECK(k::dot(a, b) == 35.0);
  CHECK(k::dot3(w, a, b) == 19.0);
  CHECK(k::sum(std::span<const double>()) == 0.0);
}

TEST_CASE("unsupported backend is rejected") {
  for (const k::Backend b : {k::Backend::Avx2, k::Backend::Neon}) {
    if (!k::backend_supported(b)) CHECK_THROWS(k::set_backend(b));
  }
  CHECK(k::backend_supported(k::Backend::Scalar));
}
