#include "dpgp/dp_rkhs.hpp"

#include <cmath>
#include <string>

#include "dpgp/error.hpp"

namespace dpgp {

double bound_b(const Eigen::MatrixXd& Kinv, bool nonneg_kernel) {
  if (Kinv.rows() != Kinv.cols()) throw DimensionError("bound_b needs a square matrix");
  if (!nonneg_kernel) return Kinv.cwiseAbs().colwise().sum().maxCoeff();
  const double pos = Kinv.cwiseMax(0.0).colwise().sum().maxCoeff();
  const double neg = (-Kinv).cwiseMax(0.0).colwise().sum().maxCoeff();
  return std::max(pos, neg);
}

double varah_bound(const Eigen::MatrixXd& J) {
  if (J.rows() != J.cols()) throw DimensionError("varah_bound needs a square matrix");
  double bound = 0.0;
  for (Eigen::Index i = 0; i < J.rows(); ++i) {
    const double diag = std::abs(J(i, i));
    const double margin = diag - (J.row(i).cwiseAbs().sum() - diag);
    if (!(margin > 0.0))
      throw NotDiagonallyDominant("row " + std::to_string(i) +
                                  " is not strictly diagonally dominant (margin " +
                                  std::to_string(margin) + ")");
    bound = std::max(bound, 1.0 / margin);
  }
  return bound;
}

Eigen::VectorXd sample_prior(const KernelSpec& spec, const Eigen::MatrixXd& Xstar,
                             Rng& rng) {
  return sample_mvn(gram(spec, Xstar), rng);
}

RkhsRelease::RkhsRelease(const GPModel& model, const Eigen::MatrixXd& Xstar,
                         const DPParams& dp, double noise_multiplier) {
  dp.validate();
  if (std::abs(model.spec().variance - 1.0) > 1e-12)
    throw std::invalid_argument(
        "RKHS release needs a kernel normalized to variance 1, got " +
        std::to_string(model.spec().variance));
  if (noise_multiplier < 0.0) throw std::invalid_argument("noise multiplier must be >= 0");

  info_.mechanism = "rkhs";
  info_.dp = dp;
  info_.c = c_delta(dp.delta, GaussianVariant::rkhs);
  // The EQ kernel is non-negative, which halves the worst case in general.
  info_.bound_b = bound_b(model.inverse_covariance(), true);
  info_.sensitivity = dp.d * info_.bound_b;
  info_.scale = info_.sensitivity * info_.c / dp.epsilon;
  info_.noise_multiplier = noise_multiplier;

  mean_ = model.predict_mean(Xstar);
  posterior_var_ = model.predict_var(Xstar);
  prior_cov_ = gram(model.spec(), Xstar);
  prior_factor_ = SymmetricSpectrum(prior_cov_).sqrt_factor();
}

Eigen::MatrixXd RkhsRelease::noise_covariance() const {
  const double s = info_.scale * info_.noise_multiplier;
  return s * s * prior_cov_;
}

ReleaseResult RkhsRelease::draw(Rng& rng) const {
  const double s = info_.scale * info_.noise_multiplier;
  ReleaseResult out;
  out.mean = mean_;
  out.predictions = mean_ + s * (prior_factor_ * standard_normal(mean_.size(), rng));
  out.posterior_var = posterior_var_;
  out.noise_std = s * prior_cov_.diagonal().cwiseSqrt();
  out.info = info_;
  return out;
}

ReleaseResult release_rkhs(const GPModel& model, const Eigen::MatrixXd& Xstar,
                           const DPParams& dp, Rng& rng) {
  return RkhsRelease(model, Xstar, dp).draw(rng);
}

}  // namespace dpgp
