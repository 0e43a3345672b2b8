#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dpgp/dataset.hpp"
#include "dpgp/kernel.hpp"
#include "dpgp/linalg.hpp"
#include "dpgp/privacy.hpp"

namespace dpgp {

enum class FoldScheme {
  monte_carlo,  // each fold draws its own random test subset
  partition,    // classic K-fold: every point is tested exactly once
};

struct Fold {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

// Folds for n points. For monte_carlo each test set has
// max(1, round(test_fraction * n)) points; fold RNG streams derive from rng.
std::vector<Fold> make_folds(Eigen::Index n, int folds, FoldScheme scheme,
                             double test_fraction, Rng& rng);

struct CandidateScore {
  double utility = 0.0;      // -sum over folds of the SSE
  double sensitivity = 0.0;  // bound on |change of the summed SSE| for neighbours
  // d-free max_j |c_jk|^2 per fold, in fold order.
  std::vector<double> fold_max_col_norm_sq;
};

/// 9 d^2 + d^2 * (sum of the K-1 largest fold column-norm maxima).
///
/// The 9 d^2 term covers the single fold in which the perturbed point is a
/// test point, with its prediction error thresholded at +-4d.
double sse_sensitivity(std::vector<double> fold_max_col_norm_sq, double d);

struct UtilityOptions {
  // When set, fold predictions are cloaking releases under this budget
  // instead of the non-private posterior mean.
  std::optional<DPParams> release_dp;
  std::uint64_t release_seed = 0;
};

CandidateScore sse_utility(const Dataset& data, const KernelSpec& spec,
                           const std::vector<Fold>& folds,
                           const UtilityOptions& opts = {});

// Selection probabilities exp(eps u_i / (2 sensitivity)) / sum_j (...).
Eigen::VectorXd exponential_mechanism_probabilities(const Eigen::VectorXd& utilities,
                                                    double sensitivity, double epsilon);

Eigen::Index exponential_mechanism(const Eigen::VectorXd& utilities, double sensitivity,
                                   double epsilon, Rng& rng);

struct HyperGrid {
  std::vector<KernelSpec> candidates;
  int folds = 10;
  double select_epsilon = 1.0;
  FoldScheme scheme = FoldScheme::monte_carlo;
  double test_fraction = 0.1;
  UtilityOptions utility;

  void validate() const;
};

struct Selection {
  Eigen::Index index = 0;
  KernelSpec spec;
  std::vector<CandidateScore> scores;
  double sensitivity = 0.0;  // Delta_u, max over candidates
  Eigen::VectorXd probabilities;
};

// Scores every candidate, then draws one with the exponential mechanism.
Selection select_hyperparameters(const Dataset& data, const HyperGrid& grid, Rng& rng);

}  // namespace dpgp
