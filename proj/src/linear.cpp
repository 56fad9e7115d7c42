#include <cmath>
#include <string>

#include "confound_ui/error.hpp"
#include "confound_ui/stat_core.hpp"

namespace confound_ui {

DesignMatrix::DesignMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.cols() < 1) throw InputError("design matrix has no columns");
  if (values_.rows() < values_.cols()) {
    throw InputError("design matrix needs at least as many rows (" +
                     std::to_string(values_.rows()) + ") as columns (" +
                     std::to_string(values_.cols()) + ")");
  }
  for (Index i = 0; i < values_.rows(); ++i) {
    if (values_(i, 0) != 1.0) {
      throw InputError("design matrix column 0 must be the intercept (row " +
                       std::to_string(i) + " holds " +
                       std::to_string(values_(i, 0)) + ")");
    }
  }
  if (!values_.allFinite()) throw InputError("design matrix has non-finite entries");
}

DesignMatrix DesignMatrix::with_intercept(const Matrix& covariates) {
  Matrix m(covariates.rows(), covariates.cols() + 1);
  m.col(0).setOnes();
  m.rightCols(covariates.cols()) = covariates;
  return DesignMatrix(std::move(m));
}

kernels::ColMajorView DesignMatrix::view() const noexcept {
  return {values_.data(), static_cast<std::size_t>(values_.rows()),
          static_cast<std::size_t>(values_.cols()),
          static_cast<std::size_t>(values_.rows())};
}

Matrix select_rows(const Matrix& x, const Vector& mask, double value) {
  Index count = 0;
  for (Index i = 0; i < mask.size(); ++i) count += mask[i] == value;
  Matrix out(count, x.cols());
  Index r = 0;
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask[i] == value) out.row(r++) = x.row(i);
  }
  return out;
}

Vector select_rows(const Vector& v, const Vector& mask, double value) {
  Index count = 0;
  for (Index i = 0; i < mask.size(); ++i) count += mask[i] == value;
  Vector out(count);
  Index r = 0;
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask[i] == value) out[r++] = v[i];
  }
  return out;
}

OlsFit fit_ols(const Matrix& x, const Vector& y, int fitted_group) {
  const Index n = x.rows();
  const Index k = x.cols();
  if (y.size() != n) throw InputError("fit_ols: outcome length does not match design rows");
  if (n < k) {
    throw SingularityError("fit_ols: " + std::to_string(n) + " rows cannot identify " +
                           std::to_string(k) + " coefficients");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    const Index bad = qr.colsPermutation().indices()(qr.rank());
    throw SingularityError("fit_ols: design is rank deficient; column " +
                           std::to_string(bad) +
                           " is linearly dependent on the others (pivot " +
                           std::to_string(qr.rank()) + ")");
  }

  OlsFit fit;
  fit.rows = n;
  fit.fitted_group = fitted_group;
  fit.coefficients = qr.solve(y);

  // (X'X)^{-1} = P R^{-1} R^{-T} P'
  const Matrix r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Matrix r_inv =
      r.triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  const Matrix g = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.gram_inverse = perm * g * perm.transpose();
  fit.gram_inverse = 0.5 * (fit.gram_inverse + fit.gram_inverse.transpose()).eval();

  Vector fitted(n);
  const kernels::ColMajorView view{x.data(), static_cast<std::size_t>(n),
                                   static_cast<std::size_t>(k),
                                   static_cast<std::size_t>(x.outerStride())};
  kernels::gemv(view, {fit.coefficients.data(), static_cast<std::size_t>(k)},
                {fitted.data(), static_cast<std::size_t>(n)});
  fit.residuals = y - fitted;
  const double rss = kernels::dot({fit.residuals.data(), static_cast<std::size_t>(n)},
                                  {fit.residuals.data(), static_cast<std::size_t>(n)});
  fit.residual_variance = n > k ? rss / static_cast<double>(n - k) : 0.0;
  return fit;
}

}  // namespace confound_ui
