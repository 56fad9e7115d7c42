#include <algorithm>
#include <cmath>

#include "confound_ui/error.hpp"
#include "confound_ui/stat_core.hpp"

namespace confound_ui {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(RngSeed seed)
    : engine_(splitmix64(seed.seed ^ splitmix64(seed.stream + 0x9E3779B97F4A7C15ULL))) {}

double Rng::uniform() noexcept {
  // (k + 0.5) / 2^53 with k in [0, 2^53): never 0, never 1.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double Rng::normal() noexcept { return normal_quantile(uniform()); }

bool Rng::bernoulli(double p) noexcept { return uniform() < p; }

Matrix psd_factor(const Matrix& covariance) {
  const Index d = covariance.rows();
  if (covariance.cols() != d) throw DecompositionError("covariance must be square");
  if (!covariance.allFinite()) throw DecompositionError("covariance has non-finite entries");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + covariance.cwiseAbs().maxCoeff())) {
    throw DecompositionError("covariance is not symmetric");
  }
  Eigen::LDLT<Matrix> ldlt(covariance);
  const double scale = std::max(1.0, covariance.diagonal().cwiseAbs().maxCoeff());
  const Vector dvec = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || dvec.minCoeff() < -1e-12 * scale) {
    throw DecompositionError("covariance is not positive semi-definite (smallest pivot " +
                             std::to_string(dvec.minCoeff()) + ")");
  }
  const Matrix l = ldlt.matrixL();
  const Vector root = dvec.cwiseMax(0.0).cwiseSqrt();
  Matrix ld = l * root.asDiagonal();
  // covariance = P' L D L' P
  Matrix factor = ldlt.transpositionsP().transpose() * ld;
  // A zero pivot with a nonzero remaining column would mean the matrix was
  // indefinite after all; verify the reconstruction.
  if ((factor * factor.transpose() - covariance).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw DecompositionError("covariance is not positive semi-definite");
  }
  return factor;
}

Matrix sample_mvn(const Vector& mean, const Matrix& covariance, Rng& rng, Index n) {
  if (mean.size() != covariance.rows()) {
    throw DecompositionError("mean and covariance dimensions differ");
  }
  const Matrix factor = psd_factor(covariance);
  const Index d = mean.size();
  Matrix out(n, d);
  Vector u(d);
  for (Index r = 0; r < n; ++r) {
    for (Index j = 0; j < d; ++j) u[j] = rng.normal();
    for (Index j = 0; j < d; ++j) {
      double s = mean[j];
      for (Index k = 0; k < d; ++k) s += factor(j, k) * u[k];
      out(r, j) = s;
    }
  }
  return out;
}

Matrix sample_mvn(const Vector& mean, const Matrix& covariance, RngSeed seed, Index n) {
  Rng rng(seed);
  return sample_mvn(mean, covariance, rng, n);
}

}  // namespace confound_ui
