#pragma once

#include <Eigen/Dense>

#include "dpgp/kernel.hpp"

namespace dpgp {

/// Zero-mean GP regression model with a cached Cholesky factor of
/// K = K' + noise_variance * I and the weights alpha = K^{-1} y.
///
/// Immutable after `fit`; every query is const and safe to run concurrently.
class GPModel {
 public:
  static GPModel fit(Eigen::MatrixXd X, Eigen::VectorXd y, KernelSpec spec);

  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& outputs() const { return y_; }
  const KernelSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& chol() const { return L_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  Eigen::Index size() const { return X_.rows(); }
  // True when the first factorization failed and jitter was added.
  bool jittered() const { return jittered_; }

  Eigen::VectorXd predict_mean(const Eigen::MatrixXd& Xstar) const;
  // Latent-function posterior covariance, without observation noise.
  Eigen::MatrixXd predict_cov(const Eigen::MatrixXd& Xstar) const;
  Eigen::VectorXd predict_var(const Eigen::MatrixXd& Xstar) const;

  // C = K_{*f} K^{-1}; predict_mean(Xstar) == C * y.
  Eigen::MatrixXd cloaking_matrix(const Eigen::MatrixXd& Xstar) const;

  // Explicit K^{-1} (symmetrized), only for consumers that need the entries.
  Eigen::MatrixXd inverse_covariance() const;

  // K^{-1} B via the cached factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

 private:
  GPModel() = default;

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  KernelSpec spec_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
  bool jittered_ = false;
};

}  // namespace dpgp
