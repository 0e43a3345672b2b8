#pragma once

#include <string>

#include <Eigen/Dense>

namespace dpgp {

/// (epsilon, delta) budget plus the output sensitivity d: neighbouring
/// datasets differ in one training output by at most d.
struct DPParams {
  double epsilon = 1.0;
  double delta = 0.01;
  double d = 1.0;

  void validate() const;
};

enum class GaussianVariant {
  rkhs,      // sqrt(2 ln(1.25 / delta)), function release via a prior sample
  cloaking,  // sqrt(2 ln(2 / delta)), vector release with a shaped covariance
};

// The tight Gaussian-mechanism constant c(delta) for the given release.
double c_delta(double delta, GaussianVariant variant);

/// Everything a reviewer needs to re-derive the guarantee of one release.
struct MechanismInfo {
  std::string mechanism;
  DPParams dp;
  double c = 0.0;            // c(delta)
  double bound_b = 0.0;      // b(K^{-1}) column bound (RKHS only)
  double sensitivity = 0.0;  // d * b(K^{-1}) (RKHS) or d * sqrt(Delta) (cloaking)
  double delta_achieved = 0.0;  // max_j c_j^T M^+ c_j (cloaking only)
  double scale = 0.0;        // multiplier applied to the unit noise draw
  double noise_multiplier = 1.0;  // 0 disables noise: NOT PRIVATE
};

struct ReleaseResult {
  Eigen::VectorXd predictions;    // noised posterior mean
  Eigen::VectorXd mean;           // non-private posterior mean
  Eigen::VectorXd posterior_var;  // latent posterior variance per test point
  Eigen::VectorXd noise_std;      // DP noise standard deviation per test point
  MechanismInfo info;
};

}  // namespace dpgp
