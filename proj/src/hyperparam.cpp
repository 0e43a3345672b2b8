#include "dpgp/hyperparam.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "dpgp/cloaking.hpp"
#include "dpgp/error.hpp"
#include "dpgp/gp_core.hpp"

namespace dpgp {

std::vector<Fold> make_folds(Eigen::Index n, int folds, FoldScheme scheme,
                             double test_fraction, Rng& rng) {
  if (folds < 2) throw std::invalid_argument("need at least two folds");
  if (n < 2) throw std::invalid_argument("need at least two points to cross-validate");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<Fold> out(static_cast<std::size_t>(folds));

  if (scheme == FoldScheme::partition) {
    if (folds > n) throw std::invalid_argument("more folds than points");
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i % folds);
      for (std::size_t f = 0; f < out.size(); ++f)
        (f == k ? out[f].test : out[f].train).push_back(order[static_cast<std::size_t>(i)]);
    }
  } else {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw std::invalid_argument("test fraction must lie in (0, 1)");
    const auto n_test = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n))),
        1, n - 1);
    for (auto& fold : out) {
      Rng fold_rng(rng());
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::shuffle(order.begin(), order.end(), fold_rng);
      fold.test.assign(order.begin(), order.begin() + n_test);
      fold.train.assign(order.begin() + n_test, order.end());
      std::sort(fold.test.begin(), fold.test.end());
      std::sort(fold.train.begin(), fold.train.end());
    }
  }
  return out;
}

double sse_sensitivity(std::vector<double> fold_max_col_norm_sq, double d) {
  if (fold_max_col_norm_sq.empty()) throw std::invalid_argument("no folds");
  std::sort(fold_max_col_norm_sq.begin(), fold_max_col_norm_sq.end(), std::greater<>());
  const double train_terms = std::accumulate(fold_max_col_norm_sq.begin(),
                                             fold_max_col_norm_sq.end() - 1, 0.0);
  return 9.0 * d * d + d * d * train_terms;
}

CandidateScore sse_utility(const Dataset& data, const KernelSpec& spec,
                           const std::vector<Fold>& folds, const UtilityOptions& opts) {
  if (folds.empty()) throw std::invalid_argument("no folds");
  const double d = data.d();
  CandidateScore score;
  double sse = 0.0;
  // How many folds test each point, and the summed train terms it sees.
  std::vector<double> per_point(static_cast<std::size_t>(data.size()), 0.0);

  for (std::size_t k = 0; k < folds.size(); ++k) {
    const Fold& fold = folds[k];
    if (fold.train.empty() || fold.test.empty())
      throw std::invalid_argument("fold " + std::to_string(k) +
                                  " has an empty train or test set");
    const Dataset train = data.subset(fold.train);
    const Dataset test = data.subset(fold.test);
    const GPModel model = GPModel::fit(train.X, train.y, spec);
    const Eigen::MatrixXd C = model.cloaking_matrix(test.X);
    const double m = C.colwise().squaredNorm().maxCoeff();
    score.fold_max_col_norm_sq.push_back(m);

    Eigen::VectorXd pred;
    if (opts.release_dp) {
      FindLambdasOptions lo;
      lo.seed = opts.release_seed + k;
      const CloakingRelease release(model, test.X, *opts.release_dp, lo);
      Rng rng(opts.release_seed ^ (0x5851f42d4c957f2dULL * (k + 1)));
      pred = release.draw(rng).predictions;
    } else {
      pred = model.predict_mean(test.X);
    }
    sse += (pred - test.y).squaredNorm();

    for (Eigen::Index i : fold.test) per_point[static_cast<std::size_t>(i)] += 9.0;
    for (Eigen::Index i : fold.train) per_point[static_cast<std::size_t>(i)] += m;
  }

  score.utility = -sse;
  // Under Monte Carlo folds a point may be tested more than once, so the
  // per-point accounting can exceed the single-test-fold formula.
  const double worst_point = *std::max_element(per_point.begin(), per_point.end());
  score.sensitivity =
      std::max(sse_sensitivity(score.fold_max_col_norm_sq, d), d * d * worst_point);
  return score;
}

Eigen::VectorXd exponential_mechanism_probabilities(const Eigen::VectorXd& utilities,
                                                    double sensitivity, double epsilon) {
  if (utilities.size() == 0) throw std::invalid_argument("no candidates to select from");
  if (!(sensitivity > 0.0)) throw std::invalid_argument("utility sensitivity must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
  const Eigen::ArrayXd logits = epsilon * utilities.array() / (2.0 * sensitivity);
  const Eigen::ArrayXd w = (logits - logits.maxCoeff()).exp();
  return (w / w.sum()).matrix();
}

Eigen::Index exponential_mechanism(const Eigen::VectorXd& utilities, double sensitivity,
                                   double epsilon, Rng& rng) {
  const Eigen::VectorXd p = exponential_mechanism_probabilities(utilities, sensitivity, epsilon);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

void HyperGrid::validate() const {
  if (candidates.empty()) throw std::invalid_argument("hyperparameter grid is empty");
  if (folds < 2) throw std::invalid_argument("need at least two folds");
  if (!(select_epsilon > 0.0)) throw std::invalid_argument("selection epsilon must be positive");
  for (const auto& c : candidates) c.validate();
}

Selection select_hyperparameters(const Dataset& data, const HyperGrid& grid, Rng& rng) {
  grid.validate();
  const std::vector<Fold> folds =
      make_folds(data.size(), grid.folds, grid.scheme, grid.test_fraction, rng);

  Selection sel;
  Eigen::VectorXd utilities(static_cast<Eigen::Index>(grid.candidates.size()));
  for (std::size_t i = 0; i < grid.candidates.size(); ++i) {
    sel.scores.push_back(sse_utility(data, grid.candidates[i], folds, grid.utility));
    utilities[static_cast<Eigen::Index>(i)] = sel.scores.back().utility;
    sel.sensitivity = std::max(sel.sensitivity, sel.scores.back().sensitivity);
  }
  sel.probabilities =
      exponential_mechanism_probabilities(utilities, sel.sensitivity, grid.select_epsilon);
  sel.index = exponential_mechanism(utilities, sel.sensitivity, grid.select_epsilon, rng);
  sel.spec = grid.candidates[static_cast<std::size_t>(sel.index)];
  return sel;
}

}  // namespace dpgp
