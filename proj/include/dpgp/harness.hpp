#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dpgp/cloaking.hpp"
#include "dpgp/dataset.hpp"
#include "dpgp/hyperparam.hpp"
#include "dpgp/kernel.hpp"
#include "dpgp/privacy.hpp"

namespace dpgp {

struct CsvSchema {
  std::vector<std::string> inputs;
  std::string output;
  // Without bounds the observed output range is used; that range depends on
  // the private outputs, so experiments always configure explicit bounds.
  std::optional<double> clip_low;
  std::optional<double> clip_high;
};

/// Reads a header-carrying CSV. Rows with an empty or NA field in a used
/// column are dropped and counted in `rejected_rows`; any other unparsable
/// value is an error naming the line.
Dataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Clamp outputs into [clip_low, clip_high], then subtract their mean.
Dataset clip_and_center(const Dataset& data, double clip_low, double clip_high);

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth);

struct SyntheticSpec {
  std::string function = "bumps2d";  // "sine1d", "bumps2d", "cluster1d"
  Eigen::Index n = 500;
  double noise_std = 0.1;
  std::uint64_t seed = 1;
};

// Smooth test functions with iid Gaussian observation noise.
Dataset make_synthetic(const SyntheticSpec& spec);

enum class Mechanism { gp, rkhs, cloaking, simple_binning, integral_binning };

Mechanism parse_mechanism(const std::string& name);
std::string to_string(Mechanism m);

struct ExperimentConfig {
  Mechanism mechanism = Mechanism::cloaking;

  // Data: either a CSV file or a synthetic generator.
  std::optional<std::filesystem::path> csv;
  CsvSchema schema;
  std::optional<SyntheticSpec> synthetic;
  double clip_low = 0.0;
  double clip_high = 1.0;

  KernelSpec kernel;
  std::optional<HyperGrid> grid;
  // Regression epsilons swept for the hyperparameter selection matrix.
  std::vector<double> selection_sweep;

  // Several epsilons share each fold's fit; +inf means no DP noise.
  std::vector<double> epsilons{1.0};
  double delta = 0.01;
  double noise_multiplier = 1.0;  // 0: NOT PRIVATE test mode
  FindLambdasOptions optimizer;

  std::vector<int> bins;  // per dimension, for the binning mechanisms
  std::vector<std::pair<double, double>> bin_range;  // default: input extent

  int folds = 30;
  Eigen::Index train_size = 0;  // 0: everything not in the test set
  Eigen::Index test_size = 0;   // 0: derived from test_fraction
  double test_fraction = 0.1;

  // Test inputs for `fit` / `release`: a regular grid or a CSV of inputs.
  Eigen::MatrixXd test_points;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  double d() const { return clip_high - clip_low; }
  bool is_private() const;
};

ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Loads the configured data and clips it (not centered).
Dataset load_dataset(const ExperimentConfig& config);

struct EpsilonResult {
  double epsilon = 0.0;
  std::vector<double> fold_rmse;  // NaN for failed folds
  double mean_rmse = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int failures = 0;
  std::vector<std::string> errors;
  // Mechanism constants, one per fold (NaN where not applicable).
  std::vector<double> scale;
  std::vector<double> sensitivity;
  std::vector<double> delta_achieved;
  std::vector<double> bound_b;
};

struct PredictionRow {
  int fold = 0;
  double epsilon = 0.0;
  Eigen::VectorXd x;
  double truth = 0.0;
  double mean = 0.0;
  double prediction = 0.0;
  double posterior_var = 0.0;
  double noise_std = 0.0;
};

struct ExperimentReport {
  Mechanism mechanism = Mechanism::cloaking;
  double d = 0.0;
  double delta = 0.0;
  double c_delta = 0.0;
  bool not_private = false;
  std::vector<EpsilonResult> results;
  std::vector<PredictionRow> predictions;
  double occupied_fraction = std::numeric_limits<double>::quiet_NaN();
};

/// Monte Carlo cross-validation of the configured mechanism. Folds run in
/// parallel with seeds derived from the master seed, so the report is
/// identical for a given config regardless of scheduling.
ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// One release on the full dataset at config.test_points, in original units.
/// The non-private GP fit is the `gp` mechanism.
ReleaseResult release_dataset(const ExperimentConfig& config, const Dataset& data,
                              double epsilon, Rng& rng);

nlohmann::json report_to_json(const ExperimentReport& report);
nlohmann::json release_to_json(const ReleaseResult& r, const ExperimentConfig& config);
nlohmann::json selection_to_json(const Selection& s);

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRow>& rows);
void write_release_csv(const std::filesystem::path& path, const Eigen::MatrixXd& Xstar,
                       const ReleaseResult& r);

/// Probability of selecting each candidate (rows) when the fold
/// predictions carry cloaking noise at each regression epsilon (columns).
Eigen::MatrixXd selection_probability_matrix(const Dataset& data, const HyperGrid& grid,
                                             const std::vector<double>& regression_epsilons,
                                             double delta, Rng& rng);

}  // namespace dpgp
