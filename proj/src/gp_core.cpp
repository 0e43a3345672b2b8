#include "dpgp/gp_core.hpp"

#include <cmath>

#include "dpgp/error.hpp"
#include "dpgp/linalg.hpp"

namespace dpgp {

GPModel GPModel::fit(Eigen::MatrixXd X, Eigen::VectorXd y, KernelSpec spec) {
  spec.validate();
  if (X.rows() < 1) throw DimensionError("fit needs at least one training point");
  if (y.size() != X.rows())
    throw DimensionError("got " + std::to_string(y.size()) + " outputs for " +
                         std::to_string(X.rows()) + " inputs");
  if (!y.allFinite()) throw std::invalid_argument("training outputs must be finite");

  GPModel m;
  m.X_ = std::move(X);
  m.y_ = std::move(y);
  m.spec_ = std::move(spec);

  const Eigen::MatrixXd K = gram_with_noise(m.spec_, m.X_);
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) {
    m.L_ = llt.matrixL();
  } else {
    m.L_ = cholesky_with_jitter(K, 1e-8 * m.spec_.variance);
    m.jittered_ = true;
  }
  m.alpha_ = m.solve(m.y_);
  return m;
}

Eigen::MatrixXd GPModel::solve(const Eigen::MatrixXd& B) const {
  if (B.rows() != size()) throw DimensionError("solve: right-hand side has wrong row count");
  const auto L = L_.triangularView<Eigen::Lower>();
  Eigen::MatrixXd tmp = L.solve(B);
  return L.transpose().solve(tmp);
}

Eigen::VectorXd GPModel::predict_mean(const Eigen::MatrixXd& Xstar) const {
  return cross(spec_, Xstar, X_) * alpha_;
}

Eigen::MatrixXd GPModel::predict_cov(const Eigen::MatrixXd& Xstar) const {
  const Eigen::MatrixXd Ks = cross(spec_, Xstar, X_);
  // V = L^{-1} K_{f*}, so k_*^T K^{-1} k_* = V^T V.
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Ks.transpose());
  Eigen::MatrixXd cov = gram(spec_, Xstar);
  cov.noalias() -= V.transpose() * V;
  return 0.5 * (cov + cov.transpose());
}

Eigen::VectorXd GPModel::predict_var(const Eigen::MatrixXd& Xstar) const {
  const Eigen::MatrixXd Ks = cross(spec_, Xstar, X_);
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Ks.transpose());
  Eigen::VectorXd var = Eigen::VectorXd::Constant(Xstar.rows(), spec_.variance) -
                        V.colwise().squaredNorm().transpose();
  return var.cwiseMax(0.0);
}

Eigen::MatrixXd GPModel::cloaking_matrix(const Eigen::MatrixXd& Xstar) const {
  // K is symmetric, so C^T = K^{-1} K_{f*}.
  return solve(cross(spec_, Xstar, X_).transpose()).transpose();
}

Eigen::MatrixXd GPModel::inverse_covariance() const {
  Eigen::MatrixXd inv = solve(Eigen::MatrixXd::Identity(size(), size()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace dpgp
