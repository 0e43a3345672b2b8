#pragma once

#include <Eigen/Dense>

#include "dpgp/gp_core.hpp"
#include "dpgp/kernel.hpp"
#include "dpgp/linalg.hpp"
#include "dpgp/privacy.hpp"

namespace dpgp {

/// b(K^{-1}): bound on |sum_i k(x*, x_i) (K^{-1} e)_i| over perturbations e
/// with a single non-zero entry of magnitude at most 1.
///
/// Without the non-negativity assumption this is the infinity norm of Kinv.
/// When the kernel is known to be non-negative (and bounded by one) the bound
/// is the larger of the infinity norms of the positive part of Kinv and the
/// positive part of -Kinv, covering both signs of the perturbation.
double bound_b(const Eigen::MatrixXd& Kinv, bool nonneg_kernel);

/// Varah's bound max_i 1 / (|J_ii| - sum_{j != i} |J_ij|) >= ||J^{-1}||_inf.
/// Throws NotDiagonallyDominant if any row margin is <= 0.
double varah_bound(const Eigen::MatrixXd& J);

// One draw from the GP prior N(0, K**) at the test inputs (no noise term).
Eigen::VectorXd sample_prior(const KernelSpec& spec, const Eigen::MatrixXd& Xstar,
                             Rng& rng);

/// Calibrated function release: posterior mean plus a prior sample scaled by
/// Delta c(delta) / epsilon, with Delta = d b(K^{-1}).
///
/// Construction does the deterministic work (bound, posterior, prior
/// factor); `draw` can then be called repeatedly with fresh randomness.
class RkhsRelease {
 public:
  // Requires spec().variance == 1 so that kernel values lie in (0, 1].
  RkhsRelease(const GPModel& model, const Eigen::MatrixXd& Xstar, const DPParams& dp,
              double noise_multiplier = 1.0);

  const MechanismInfo& info() const { return info_; }
  double bound() const { return info_.bound_b; }
  double sensitivity() const { return info_.sensitivity; }
  double scale() const { return info_.scale; }
  const Eigen::VectorXd& mean() const { return mean_; }
  // Covariance of the released vector around the posterior mean.
  Eigen::MatrixXd noise_covariance() const;

  ReleaseResult draw(Rng& rng) const;

 private:
  MechanismInfo info_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd posterior_var_;
  Eigen::MatrixXd prior_cov_;
  Eigen::MatrixXd prior_factor_;
};

ReleaseResult release_rkhs(const GPModel& model, const Eigen::MatrixXd& Xstar,
                           const DPParams& dp, Rng& rng);

}  // namespace dpgp
