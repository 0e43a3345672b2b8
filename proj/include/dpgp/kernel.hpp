#pragma once

#include <Eigen/Dense>

namespace dpgp {

enum class KernelFamily { ExponentiatedQuadratic };

/// Hyperparameters of a stationary kernel.
///
/// `variance` is the signal variance (kernel value at zero distance), one
/// lengthscale is kept per input dimension and `noise_variance` is the iid
/// observation noise added on the diagonal of the training covariance.
struct KernelSpec {
  KernelFamily family = KernelFamily::ExponentiatedQuadratic;
  double variance = 1.0;
  Eigen::VectorXd lengthscales = Eigen::VectorXd::Ones(1);
  double noise_variance = 0.0;

  static KernelSpec eq(double variance, Eigen::VectorXd lengthscales,
                       double noise_variance);
  // Same lengthscale in every one of `dims` dimensions.
  static KernelSpec eq_isotropic(double variance, double lengthscale,
                                 double noise_variance, Eigen::Index dims = 1);

  Eigen::Index dims() const { return lengthscales.size(); }

  // Throws std::invalid_argument when a parameter is out of range.
  void validate() const;
};

double eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x1,
            const Eigen::Ref<const Eigen::VectorXd>& x2);

// K' over the rows of X, without the noise term.
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X);

// K = K' + noise_variance * I.
Eigen::MatrixXd gram_with_noise(const KernelSpec& spec, const Eigen::MatrixXd& X);

// Covariance between the rows of Xstar (p of them) and the rows of X (n).
Eigen::MatrixXd cross(const KernelSpec& spec, const Eigen::MatrixXd& Xstar,
                      const Eigen::MatrixXd& X);

}  // namespace dpgp
