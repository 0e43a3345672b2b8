// dpgp: differentially private GP regression from the command line.
//
//   dpgp ingest   --input data.csv --inputs age --output height --clip-low 100 --clip-high 200
//   dpgp fit      --config experiment.json
//   dpgp release  --config experiment.json [--epsilon 1]
//   dpgp hpselect --config experiment.json
//   dpgp bench    --config experiment.json
//
// Every subcommand writes a JSON report (and CSV data where relevant) into
// the output directory and prints the report path.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpgp/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

dpgp::ExperimentConfig load(const Common& c) {
  dpgp::ExperimentConfig cfg = dpgp::load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.optimizer.seed = *c.seed;
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  fs::create_directories(cfg.output_dir);
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  std::cout << path.string() << '\n';
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Experiment config (JSON)")->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", c.seed, "Override the master seed");
  cmd->add_option("-o,--out", c.out, "Override the output directory");
}

int cmd_ingest(const std::string& input, const std::vector<std::string>& inputs,
               const std::string& output, std::optional<double> lo, std::optional<double> hi,
               const std::string& out_dir) {
  dpgp::CsvSchema schema{inputs, output, lo, hi};
  const dpgp::Dataset ds = dpgp::ingest_csv(input, schema);
  fs::create_directories(out_dir);
  const fs::path csv = fs::path(out_dir) / "dataset.csv";
  {
    std::ofstream f(csv);
    f.precision(17);
    for (const auto& name : inputs) f << name << ',';
    f << output << '\n';
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      for (Eigen::Index d = 0; d < ds.dims(); ++d) f << ds.X(i, d) << ',';
      f << ds.y[i] << '\n';
    }
  }
  json j = {{"source", input},
            {"rows", ds.size()},
            {"dims", ds.dims()},
            {"rejected_rows", ds.rejected_rows},
            {"clip_low", ds.clip_low},
            {"clip_high", ds.clip_high},
            {"d", ds.d()},
            {"clip_from_data", !(lo && hi)},
            {"dataset_csv", csv.string()}};
  write_json(fs::path(out_dir) / "ingest.json", j);
  return 0;
}

int cmd_fit(const Common& c) {
  dpgp::ExperimentConfig cfg = load(c);
  cfg.mechanism = dpgp::Mechanism::gp;
  const dpgp::Dataset data = dpgp::load_dataset(cfg);
  dpgp::Rng rng(cfg.seed);
  const dpgp::ReleaseResult r =
      dpgp::release_dataset(cfg, data, std::numeric_limits<double>::infinity(), rng);
  dpgp::write_release_csv(cfg.output_dir / "fit.csv", cfg.test_points, r);
  json j = dpgp::release_to_json(r, cfg);
  j["rows"] = data.size();
  write_json(cfg.output_dir / "fit.json", j);
  return 0;
}

int cmd_release(const Common& c, std::optional<double> epsilon) {
  const dpgp::ExperimentConfig cfg = load(c);
  const dpgp::Dataset data = dpgp::load_dataset(cfg);
  dpgp::Rng rng(cfg.seed);
  const double eps = epsilon.value_or(cfg.epsilons.front());
  const dpgp::ReleaseResult r = dpgp::release_dataset(cfg, data, eps, rng);
  dpgp::write_release_csv(cfg.output_dir / "release.csv", cfg.test_points, r);
  write_json(cfg.output_dir / "release.json", dpgp::release_to_json(r, cfg));
  return 0;
}

int cmd_hpselect(const Common& c) {
  const dpgp::ExperimentConfig cfg = load(c);
  if (!cfg.grid) throw std::invalid_argument("hpselect needs a 'grid' section in the config");
  const dpgp::Dataset data = dpgp::load_dataset(cfg);
  const dpgp::Dataset centered = dpgp::clip_and_center(data, cfg.clip_low, cfg.clip_high);
  dpgp::Rng rng(cfg.seed);
  const dpgp::Selection sel = dpgp::select_hyperparameters(centered, *cfg.grid, rng);
  json j = dpgp::selection_to_json(sel);
  j["select_epsilon"] = cfg.grid->select_epsilon;
  j["d"] = cfg.d();

  if (!cfg.selection_sweep.empty()) {
    const Eigen::MatrixXd P =
        dpgp::selection_probability_matrix(data, *cfg.grid, cfg.selection_sweep, cfg.delta, rng);
    const fs::path csv = cfg.output_dir / "selection_matrix.csv";
    std::ofstream f(csv);
    f << "candidate,lengthscale0,noise_variance";
    for (double e : cfg.selection_sweep)
      f << ",eps_" << (std::isfinite(e) ? std::to_string(e) : std::string("inf"));
    f << '\n';
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const auto& spec = cfg.grid->candidates[static_cast<std::size_t>(i)];
      f << i << ',' << spec.lengthscales[0] << ',' << spec.noise_variance;
      for (Eigen::Index e = 0; e < P.cols(); ++e) f << ',' << P(i, e);
      f << '\n';
    }
    j["selection_matrix_csv"] = csv.string();
  }
  write_json(cfg.output_dir / "hpselect.json", j);
  return 0;
}

int cmd_bench(const Common& c) {
  const dpgp::ExperimentConfig cfg = load(c);
  const dpgp::ExperimentReport rep = dpgp::run_experiment(cfg);
  dpgp::write_predictions_csv(cfg.output_dir / "predictions.csv", rep.predictions);
  json j = dpgp::report_to_json(rep);
  j["seed"] = cfg.seed;
  j["folds"] = cfg.folds;
  write_json(cfg.output_dir / "report.json", j);
  for (const auto& r : rep.results)
    std::cerr << "epsilon=" << r.epsilon << " rmse=" << r.mean_rmse << " [" << r.ci_low << ", "
              << r.ci_high << "] failures=" << r.failures << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private Gaussian process regression"};
  app.require_subcommand(1);

  std::string input, output, ingest_out = "out";
  std::vector<std::string> inputs;
  std::optional<double> clip_low, clip_high;
  auto* ingest = app.add_subcommand("ingest", "Parse and clip a CSV dataset");
  ingest->add_option("-i,--input", input, "CSV file with a header row")->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--inputs", inputs, "Input column names")->required()->delimiter(',');
  ingest->add_option("--output", output, "Output column name")->required();
  ingest->add_option("--clip-low", clip_low, "Lower clipping bound");
  ingest->add_option("--clip-high", clip_high, "Upper clipping bound");
  ingest->add_option("-o,--out", ingest_out, "Output directory");

  Common fit_c, release_c, hp_c, bench_c;
  std::optional<double> release_eps;
  auto* fit = app.add_subcommand("fit", "Non-private GP fit at the configured test points");
  add_common(fit, fit_c);
  auto* release = app.add_subcommand("release", "One DP release at the configured test points");
  add_common(release, release_c);
  release->add_option("-e,--epsilon", release_eps, "Override epsilon");
  auto* hpselect = app.add_subcommand("hpselect", "DP hyperparameter selection over a grid");
  add_common(hpselect, hp_c);
  auto* bench = app.add_subcommand("bench", "Monte Carlo cross-validation benchmark");
  add_common(bench, bench_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(input, inputs, output, clip_low, clip_high, ingest_out);
    if (*fit) return cmd_fit(fit_c);
    if (*release) return cmd_release(release_c, release_eps);
    if (*hpselect) return cmd_hpselect(hp_c);
    if (*bench) return cmd_bench(bench_c);
  } catch (const std::exception& e) {
    std::cerr << "dpgp: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
