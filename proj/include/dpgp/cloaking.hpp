#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "dpgp/gp_core.hpp"
#include "dpgp/linalg.hpp"
#include "dpgp/privacy.hpp"

namespace dpgp {

// M = sum_i lambda_i c_i c_i^T over the columns c_i of C.
Eigen::MatrixXd calc_M(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C);

// q_j = c_j^T M^+ c_j for every column, +inf for columns outside range(M).
Eigen::VectorXd column_quadratics(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C);

// max_j c_j^T M^+ c_j.
double calc_delta(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C);

// d/d lambda_j of ln|P| + sum_i lambda_i (1 - c_i^T P c_i) with P = M^+,
// i.e. 1 - c_j^T M^+ c_j.
Eigen::VectorXd grad_lambda(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& C);

struct FindLambdasOptions {
  double learning_rate = 0.05;
  double tolerance = 1e-5;  // on the euclidean norm of one projected step
  int max_iterations = 50000;
  int max_attempts = 5;  // first run plus restarts
  double init_low = 0.1;
  double init_high = 0.9;
  std::uint64_t seed = 0;
};

struct CloakingSolution {
  Eigen::MatrixXd C;
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd M;
  double delta_achieved = 0.0;
  double log_det_M = 0.0;  // pseudo log-determinant
  int iterations = 0;      // in the successful attempt
  int attempts = 0;
};

/// Raised when every attempt of `find_lambdas` ran out of iterations.
/// Carries the best iterate seen so the caller can inspect it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best_lambdas,
                   double best_delta, double last_step)
      : std::runtime_error(what),
        best_lambdas(std::move(best_lambdas)),
        best_delta(best_delta),
        last_step(last_step) {}

  Eigen::VectorXd best_lambdas;
  double best_delta;
  double last_step;
};

/// Projected gradient descent on the multipliers of
///   maximise ln|P|  s.t.  c_i^T P c_i <= 1,   P = M^{-1},
/// whose stationary point gives M = sum_i lambda_i c_i c_i^T.
CloakingSolution solve_cloaking(const Eigen::MatrixXd& C,
                                const FindLambdasOptions& opts = {});

Eigen::VectorXd find_lambdas(const Eigen::MatrixXd& C, const FindLambdasOptions& opts = {});

/// Vector release with the optimized covariance: predictions plus
/// (d sqrt(Delta) c(delta) / epsilon) z with z ~ N(0, M).
class CloakingRelease {
 public:
  CloakingRelease(const GPModel& model, const Eigen::MatrixXd& Xstar, const DPParams& dp,
                  const FindLambdasOptions& opts = {}, double noise_multiplier = 1.0);
  // Reuses a solution computed for the same model and test inputs; the
  // optimized covariance does not depend on the budget.
  CloakingRelease(const GPModel& model, const Eigen::MatrixXd& Xstar, const DPParams& dp,
                  CloakingSolution solution, double noise_multiplier = 1.0);

  const MechanismInfo& info() const { return info_; }
  const CloakingSolution& solution() const { return solution_; }
  double scale() const { return info_.scale; }
  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd noise_std() const;
  Eigen::MatrixXd noise_covariance() const;

  ReleaseResult draw(Rng& rng) const;

 private:
  MechanismInfo info_;
  CloakingSolution solution_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd posterior_var_;
  Eigen::MatrixXd factor_;
};

ReleaseResult release_cloaking(const GPModel& model, const Eigen::MatrixXd& Xstar,
                               const DPParams& dp, Rng& rng,
                               const FindLambdasOptions& opts = {});

}  // namespace dpgp
