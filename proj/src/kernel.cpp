#include "dpgp/kernel.hpp"

#include <cmath>
#include <string>

#include "dpgp/error.hpp"

namespace dpgp {

KernelSpec KernelSpec::eq(double variance, Eigen::VectorXd lengthscales,
                          double noise_variance) {
  KernelSpec spec;
  spec.variance = variance;
  spec.lengthscales = std::move(lengthscales);
  spec.noise_variance = noise_variance;
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::eq_isotropic(double variance, double lengthscale,
                                    double noise_variance, Eigen::Index dims) {
  return eq(variance, Eigen::VectorXd::Constant(dims, lengthscale), noise_variance);
}

void KernelSpec::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw std::invalid_argument("kernel variance must be positive, got " +
                                std::to_string(variance));
  if (lengthscales.size() == 0)
    throw std::invalid_argument("kernel needs at least one lengthscale");
  for (Eigen::Index d = 0; d < lengthscales.size(); ++d) {
    if (!(lengthscales[d] > 0.0) || !std::isfinite(lengthscales[d]))
      throw std::invalid_argument("lengthscale " + std::to_string(d) +
                                  " must be positive");
  }
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
    throw std::invalid_argument("noise variance must be non-negative");
}

namespace {

void check_dims(const KernelSpec& spec, Eigen::Index cols, const char* what) {
  if (cols != spec.dims())
    throw DimensionError(std::string(what) + " has " + std::to_string(cols) +
                         " columns but the kernel has " +
                         std::to_string(spec.dims()) + " lengthscales");
}

// Inputs divided by their lengthscales, so that the EQ kernel becomes
// variance * exp(-0.5 * squared euclidean distance).
Eigen::MatrixXd scaled_rows(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  return X * spec.lengthscales.cwiseInverse().asDiagonal();
}

Eigen::MatrixXd eq_from_scaled(double variance, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double r2 = (A.row(i) - B.row(j)).squaredNorm();
      out(i, j) = variance * std::exp(-0.5 * r2);
    }
  }
  return out;
}

}  // namespace

double eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x1,
            const Eigen::Ref<const Eigen::VectorXd>& x2) {
  if (x1.size() != x2.size())
    throw DimensionError("kernel arguments have different dimensions");
  check_dims(spec, x1.size(), "kernel argument");
  const double r2 =
      (x1 - x2).cwiseQuotient(spec.lengthscales).squaredNorm();
  return spec.variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  check_dims(spec, X.cols(), "input matrix");
  if (X.rows() < 1) throw DimensionError("gram needs at least one input");
  const Eigen::MatrixXd A = scaled_rows(spec, X);
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = spec.variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = spec.variance * std::exp(-0.5 * (A.row(i) - A.row(j)).squaredNorm());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd gram_with_noise(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K = gram(spec, X);
  K.diagonal().array() += spec.noise_variance;
  return K;
}

Eigen::MatrixXd cross(const KernelSpec& spec, const Eigen::MatrixXd& Xstar,
                      const Eigen::MatrixXd& X) {
  check_dims(spec, Xstar.cols(), "test input matrix");
  check_dims(spec, X.cols(), "training input matrix");
  return eq_from_scaled(spec.variance, scaled_rows(spec, Xstar), scaled_rows(spec, X));
}

}  // namespace dpgp
