#pragma once

#include <random>

#include <Eigen/Dense>

namespace dpgp {

using Rng = std::mt19937_64;

// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double kPinvRelTol = 1e-10;

/// Eigen-decomposition of a symmetric PSD matrix with a rank cutoff, giving
/// the Moore-Penrose pseudo-inverse, a square-root factor, range tests and
/// the pseudo log-determinant from one factorization.
class SymmetricSpectrum {
 public:
  explicit SymmetricSpectrum(const Eigen::MatrixXd& A, double rel_tol = kPinvRelTol);

  Eigen::Index rank() const { return rank_; }
  const Eigen::VectorXd& eigenvalues() const { return values_; }

  Eigen::MatrixXd pinv() const;
  // F with F * F^T = A (negative and sub-threshold eigenvalues dropped).
  Eigen::MatrixXd sqrt_factor() const;
  // Sum of the logs of the retained eigenvalues; -inf for the zero matrix.
  double pseudo_logdet() const;
  // v^T A^+ v, or +inf when v has a component outside the range of A.
  double quadratic_pinv(const Eigen::Ref<const Eigen::VectorXd>& v,
                        double range_rel_tol = 1e-8) const;

 private:
  Eigen::VectorXd values_;
  Eigen::MatrixXd vectors_;
  Eigen::Index rank_ = 0;
  double cutoff_ = 0.0;
};

/// Lower Cholesky factor of A. On failure the diagonal is bumped by
/// `jitter` once; a second failure throws NotPositiveDefinite.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& A, double jitter);

/// Draw from N(0, cov) using the symmetric square root, so singular and
/// rank-deficient covariances are fine.
Eigen::VectorXd sample_mvn(const Eigen::MatrixXd& cov, Rng& rng);

// Standard normal vector; the same draws feed every sampler in the library.
Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng);

}  // namespace dpgp
