#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dpgp/kernel.hpp"
#include "dpgp/linalg.hpp"
#include "dpgp/privacy.hpp"

namespace dpgp {

/// Axis-aligned grid of bins with per-bin occupancy and output means.
///
/// Bins are half-open [low, high) in every dimension except the last bin,
/// which also includes its upper edge. Bins are flattened row-major with
/// the first dimension varying slowest.
struct BinGrid {
  std::vector<Eigen::VectorXd> edges;
  Eigen::VectorXi counts;
  Eigen::VectorXd means;  // population_mean for empty bins
  double population_mean = 0.0;

  Eigen::Index dims() const { return static_cast<Eigen::Index>(edges.size()); }
  Eigen::Index bins() const { return counts.size(); }
  double occupied_fraction() const;

  // Flattened bin containing x, or -1 when x lies outside the grid.
  Eigen::Index locate(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd box_low(Eigen::Index bin) const;
  Eigen::VectorXd box_high(Eigen::Index bin) const;
};

// `bins` equal-width intervals spanning [low, high].
Eigen::VectorXd uniform_edges(double low, double high, int bins);

BinGrid bin_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 std::vector<Eigen::VectorXd> edges);

/// Laplace mechanism on each occupied bin's mean with scale d / (count eps).
/// A single record moves only its own bin's mean, so bins compose in parallel.
/// Empty bins are released as the population mean without noise.
Eigen::VectorXd dp_bin_means(const BinGrid& grid, const DPParams& dp, Rng& rng,
                             double noise_multiplier = 1.0);

struct BinnedPrediction {
  Eigen::VectorXd values;
  std::vector<bool> out_of_range;  // those points received the population mean
};

BinnedPrediction predict_binned(const BinGrid& grid, const Eigen::VectorXd& bin_values,
                                const Eigen::MatrixXd& Xstar);

struct Box {
  Eigen::VectorXd low;
  Eigen::VectorXd high;
};

/// Covariance between the integrals of the latent EQ-kernel function over
/// two boxes: variance * prod_d int int exp(-(s - t)^2 / (2 l_d^2)) ds dt.
double integral_kernel_eval(const KernelSpec& spec, const Box& a, const Box& b);

// Covariance between f(x) and the integral of f over the box.
double integral_point_cross(const KernelSpec& spec, const Box& box,
                            const Eigen::Ref<const Eigen::VectorXd>& x);

/// GP on the latent function observed through noisy bin averages.
///
/// Each occupied bin contributes the observation (1/|B|) * integral_B f with
/// noise variance noise_variance / count plus the Laplace variance
/// 2 (d / (count eps))^2 of its released mean.
class IntegralGP {
 public:
  IntegralGP(const BinGrid& grid, const Eigen::VectorXd& bin_values, const KernelSpec& spec,
             const DPParams& dp, double noise_multiplier = 1.0);

  Eigen::VectorXd predict(const Eigen::MatrixXd& Xstar) const;
  Eigen::Index observations() const { return static_cast<Eigen::Index>(boxes_.size()); }

 private:
  KernelSpec spec_;
  std::vector<Box> boxes_;
  Eigen::VectorXd weights_;
  double prior_mean_ = 0.0;
};

}  // namespace dpgp
