#include "dpgp/cloaking.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dpgp/error.hpp"

namespace dpgp {
namespace {

void check_lambdas(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C) {
  if (lambdas.size() != C.cols())
    throw DimensionError("got " + std::to_string(lambdas.size()) + " multipliers for " +
                         std::to_string(C.cols()) + " cloaking columns");
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    if (!(lambdas[i] >= 0.0))
      throw std::invalid_argument("multiplier " + std::to_string(i) + " is negative");
}

Eigen::MatrixXd weighted_outer(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C) {
  Eigen::MatrixXd M = C * lambdas.asDiagonal() * C.transpose();
  return 0.5 * (M + M.transpose());
}

// c_j^T M^+ c_j for all j using the pseudo-inverse only (no range test).
Eigen::VectorXd pinv_quadratics(const SymmetricSpectrum& spectrum, const Eigen::MatrixXd& C) {
  const Eigen::MatrixXd W = spectrum.pinv() * C;
  return C.cwiseProduct(W).colwise().sum().transpose();
}

struct Attempt {
  Eigen::VectorXd lambdas;
  int iterations = 0;
  double last_step = std::numeric_limits<double>::infinity();
  bool converged = false;
};

Attempt descend(const Eigen::MatrixXd& C, Eigen::VectorXd lambdas,
                const FindLambdasOptions& opts) {
  Attempt a;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const SymmetricSpectrum spectrum(weighted_outer(lambdas, C));
    const Eigen::VectorXd grad =
        Eigen::VectorXd::Ones(C.cols()) - pinv_quadratics(spectrum, C);
    // Projected step: multipliers are clamped at zero.
    const Eigen::VectorXd next = (lambdas - opts.learning_rate * grad).cwiseMax(0.0);
    a.last_step = (next - lambdas).norm();
    a.iterations = it;
    lambdas = next;
    if (!lambdas.allFinite()) break;
    if (a.last_step < opts.tolerance) {
      a.converged = true;
      break;
    }
  }
  a.lambdas = std::move(lambdas);
  return a;
}

}  // namespace

Eigen::MatrixXd calc_M(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C) {
  check_lambdas(lambdas, C);
  return weighted_outer(lambdas, C);
}

Eigen::VectorXd column_quadratics(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C) {
  const SymmetricSpectrum spectrum(calc_M(lambdas, C));
  Eigen::VectorXd q(C.cols());
  for (Eigen::Index j = 0; j < C.cols(); ++j) q[j] = spectrum.quadratic_pinv(C.col(j));
  return q;
}

double calc_delta(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C) {
  if (C.cols() == 0) return 0.0;
  return column_quadratics(lambdas, C).maxCoeff();
}

Eigen::VectorXd grad_lambda(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C) {
  const SymmetricSpectrum spectrum(calc_M(lambdas, C));
  return Eigen::VectorXd::Ones(C.cols()) - pinv_quadratics(spectrum, C);
}

CloakingSolution solve_cloaking(const Eigen::MatrixXd& C, const FindLambdasOptions& opts) {
  if (C.cols() == 0 || C.rows() == 0) throw DimensionError("cloaking matrix is empty");
  if (C.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("cloaking matrix is zero; nothing to protect");
  if (opts.max_attempts < 1) throw std::invalid_argument("need at least one attempt");

  Eigen::VectorXd best;
  double best_delta = std::numeric_limits<double>::infinity();
  double best_step = std::numeric_limits<double>::infinity();

  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    Rng rng(opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> init(opts.init_low, opts.init_high);
    Eigen::VectorXd start(C.cols());
    for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = init(rng);

    Attempt a = descend(C, std::move(start), opts);
    if (!a.lambdas.allFinite()) continue;
    const double delta = calc_delta(a.lambdas, C);
    if (a.converged && std::isfinite(delta)) {
      CloakingSolution s;
      s.C = C;
      s.lambdas = std::move(a.lambdas);
      s.M = weighted_outer(s.lambdas, C);
      s.delta_achieved = delta;
      s.log_det_M = SymmetricSpectrum(s.M).pseudo_logdet();
      s.iterations = a.iterations;
      s.attempts = attempt + 1;
      return s;
    }
    if (a.last_step < best_step) {
      best = a.lambdas;
      best_delta = delta;
      best_step = a.last_step;
    }
  }
  throw ConvergenceError("cloaking multipliers did not converge in " +
                             std::to_string(opts.max_attempts) + " attempts",
                         best, best_delta, best_step);
}

Eigen::VectorXd find_lambdas(const Eigen::MatrixXd& C, const FindLambdasOptions& opts) {
  return solve_cloaking(C, opts).lambdas;
}

CloakingRelease::CloakingRelease(const GPModel& model, const Eigen::MatrixXd& Xstar,
                                 const DPParams& dp, const FindLambdasOptions& opts,
                                 double noise_multiplier)
    : CloakingRelease(model, Xstar, dp,
                      solve_cloaking(model.cloaking_matrix(Xstar), opts), noise_multiplier) {}

CloakingRelease::CloakingRelease(const GPModel& model, const Eigen::MatrixXd& Xstar,
                                 const DPParams& dp, CloakingSolution solution,
                                 double noise_multiplier)
    : solution_(std::move(solution)) {
  dp.validate();
  if (Xstar.rows() < 1) throw DimensionError("need at least one test point");
  if (solution_.C.rows() != Xstar.rows() || solution_.C.cols() != model.size())
    throw DimensionError("cloaking solution does not match the model and test inputs");
  if (noise_multiplier < 0.0) throw std::invalid_argument("noise multiplier must be >= 0");

  info_.mechanism = "cloaking";
  info_.dp = dp;
  info_.c = c_delta(dp.delta, GaussianVariant::cloaking);
  info_.delta_achieved = solution_.delta_achieved;
  // Delta enters as a Mahalanobis norm, hence the square root.
  info_.sensitivity = dp.d * std::sqrt(solution_.delta_achieved);
  info_.scale = info_.sensitivity * info_.c / dp.epsilon;
  info_.noise_multiplier = noise_multiplier;

  mean_ = model.predict_mean(Xstar);
  posterior_var_ = model.predict_var(Xstar);
  factor_ = SymmetricSpectrum(solution_.M).sqrt_factor();
}

Eigen::VectorXd CloakingRelease::noise_std() const {
  const double s = info_.scale * info_.noise_multiplier;
  return s * solution_.M.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd CloakingRelease::noise_covariance() const {
  const double s = info_.scale * info_.noise_multiplier;
  return s * s * solution_.M;
}

ReleaseResult CloakingRelease::draw(Rng& rng) const {
  const double s = info_.scale * info_.noise_multiplier;
  ReleaseResult out;
  out.mean = mean_;
  out.predictions = mean_ + s * (factor_ * standard_normal(mean_.size(), rng));
  out.posterior_var = posterior_var_;
  out.noise_std = noise_std();
  out.info = info_;
  return out;
}

ReleaseResult release_cloaking(const GPModel& model, const Eigen::MatrixXd& Xstar,
                               const DPParams& dp, Rng& rng,
                               const FindLambdasOptions& opts) {
  return CloakingRelease(model, Xstar, dp, opts).draw(rng);
}

}  // namespace dpgp
