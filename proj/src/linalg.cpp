#include "dpgp/linalg.hpp"

#include <cmath>
#include <limits>

#include "dpgp/error.hpp"

namespace dpgp {

SymmetricSpectrum::SymmetricSpectrum(const Eigen::MatrixXd& A, double rel_tol) {
  if (A.rows() != A.cols()) throw DimensionError("matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("symmetric eigen-decomposition failed");
  values_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
  const double largest = values_.size() > 0 ? values_.maxCoeff() : 0.0;
  cutoff_ = largest > 0.0 ? rel_tol * largest : 0.0;
  rank_ = 0;
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (values_[i] > cutoff_) ++rank_;
}

Eigen::MatrixXd SymmetricSpectrum::pinv() const {
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(values_.size());
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (values_[i] > cutoff_) inv[i] = 1.0 / values_[i];
  return vectors_ * inv.asDiagonal() * vectors_.transpose();
}

Eigen::MatrixXd SymmetricSpectrum::sqrt_factor() const {
  Eigen::VectorXd root = Eigen::VectorXd::Zero(values_.size());
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (values_[i] > cutoff_) root[i] = std::sqrt(values_[i]);
  // Symmetric square root: coincident inputs give identical rows.
  return vectors_ * root.asDiagonal() * vectors_.transpose();
}

double SymmetricSpectrum::pseudo_logdet() const {
  if (rank_ == 0) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (values_[i] > cutoff_) s += std::log(values_[i]);
  return s;
}

double SymmetricSpectrum::quadratic_pinv(const Eigen::Ref<const Eigen::VectorXd>& v,
                                         double range_rel_tol) const {
  if (v.size() != values_.size()) throw DimensionError("vector length mismatch");
  const Eigen::VectorXd coef = vectors_.transpose() * v;
  double q = 0.0;
  double outside = 0.0;
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (values_[i] > cutoff_)
      q += coef[i] * coef[i] / values_[i];
    else
      outside += coef[i] * coef[i];
  }
  const double norm2 = v.squaredNorm();
  if (norm2 > 0.0 && outside > range_rel_tol * norm2)
    return std::numeric_limits<double>::infinity();
  return q;
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& A, double jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd bumped = A;
  bumped.diagonal().array() += jitter;
  llt.compute(bumped);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("covariance is not positive definite after jitter");
  return llt.matrixL();
}

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

Eigen::VectorXd sample_mvn(const Eigen::MatrixXd& cov, Rng& rng) {
  const SymmetricSpectrum spectrum(cov);
  return spectrum.sqrt_factor() * standard_normal(cov.rows(), rng);
}

}  // namespace dpgp
