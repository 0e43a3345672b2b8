#include "dpgp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "dpgp/baselines.hpp"
#include "dpgp/dp_rkhs.hpp"
#include "dpgp/error.hpp"
#include "dpgp/gp_core.hpp"

namespace dpgp {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

// Independent stream `stream` of the master seed.
Rng derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace

Dataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (schema.inputs.empty()) throw std::invalid_argument("schema names no input columns");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw std::runtime_error(path.string() + " is empty");

  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("column '" + name + "' not found in header of " + path.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> in_cols;
  for (const auto& name : schema.inputs) in_cols.push_back(column(name));
  const std::size_t out_col = column(schema.output);

  std::vector<std::vector<double>> rows;
  std::size_t rejected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, found " +
                               std::to_string(fields.size()));
    std::vector<std::size_t> used = in_cols;
    used.push_back(out_col);
    std::vector<double> values;
    bool missing = false;
    for (std::size_t c : used) {
      if (is_missing(fields[c])) {
        missing = true;
        break;
      }
      std::size_t consumed = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[c], &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != fields[c].size() || !std::isfinite(v))
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": cannot parse '" + fields[c] + "' in column '" +
                                 header[c] + "'");
      values.push_back(v);
    }
    if (missing) {
      ++rejected;
      continue;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + " has no usable data rows");

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto D = static_cast<Eigen::Index>(in_cols.size());
  ds.X.resize(n, D);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < D; ++d) ds.X(i, d) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    ds.y[i] = rows[static_cast<std::size_t>(i)].back();
  }
  ds.rejected_rows = rejected;
  ds.label = path.filename().string();
  ds.clip_low = schema.clip_low.value_or(ds.y.minCoeff());
  ds.clip_high = schema.clip_high.value_or(ds.y.maxCoeff());
  if (!(ds.clip_high > ds.clip_low))
    throw std::invalid_argument("clip bounds must satisfy low < high");
  ds.y = ds.y.cwiseMax(ds.clip_low).cwiseMin(ds.clip_high);
  return ds;
}

Dataset clip_and_center(const Dataset& data, double clip_low, double clip_high) {
  if (!(clip_high > clip_low)) throw std::invalid_argument("clip_high must exceed clip_low");
  Dataset out = data;
  out.clip_low = clip_low;
  out.clip_high = clip_high;
  // Un-center first so repeated calls compose.
  const Eigen::VectorXd raw = (data.y.array() + data.offset).matrix();
  const Eigen::VectorXd clipped = raw.cwiseMax(clip_low).cwiseMin(clip_high);
  out.offset = clipped.size() > 0 ? clipped.mean() : 0.0;
  out.y = (clipped.array() - out.offset).matrix();
  return out;
}

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
  if (predictions.size() != truth.size())
    throw DimensionError("rmse: predictions and truth differ in length");
  if (predictions.size() == 0) throw std::invalid_argument("rmse of empty vectors");
  return std::sqrt((predictions - truth).squaredNorm() / static_cast<double>(truth.size()));
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("synthetic dataset needs n >= 1");
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  Dataset ds;
  ds.label = "synthetic:" + spec.function;
  const double pi = std::numbers::pi;
  if (spec.function == "sine1d") {
    ds.X.resize(spec.n, 1);
    ds.y.resize(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      const double x = 10.0 * unit(rng);
      ds.X(i, 0) = x;
      ds.y[i] = std::sin(x) + 0.3 * std::sin(2.7 * x) + noise(rng);
    }
  } else if (spec.function == "bumps2d") {
    ds.X.resize(spec.n, 2);
    ds.y.resize(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      const double a = unit(rng), b = unit(rng);
      ds.X(i, 0) = a;
      ds.X(i, 1) = b;
      const double bump = std::exp(-((a - 0.3) * (a - 0.3) + (b - 0.7) * (b - 0.7)) / 0.02);
      ds.y[i] = std::sin(2.0 * pi * a) * std::cos(pi * b) + 0.8 * bump + noise(rng);
    }
  } else if (spec.function == "cluster1d") {
    // Dense cluster around 5 with a sparse tail out to 10.
    ds.X.resize(spec.n, 1);
    ds.y.resize(spec.n);
    std::normal_distribution<double> cluster(5.0, 0.5);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      const double x = unit(rng) < 0.9 ? cluster(rng) : 10.0 * unit(rng);
      ds.X(i, 0) = x;
      ds.y[i] = std::sin(x) + noise(rng);
    }
  } else {
    throw std::invalid_argument("unknown synthetic function '" + spec.function + "'");
  }
  ds.clip_low = ds.y.minCoeff();
  ds.clip_high = ds.y.maxCoeff();
  return ds;
}

Mechanism parse_mechanism(const std::string& name) {
  if (name == "gp") return Mechanism::gp;
  if (name == "rkhs") return Mechanism::rkhs;
  if (name == "cloaking") return Mechanism::cloaking;
  if (name == "simple_binning") return Mechanism::simple_binning;
  if (name == "integral_binning") return Mechanism::integral_binning;
  throw std::invalid_argument("unknown mechanism '" + name + "'");
}

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::gp: return "gp";
    case Mechanism::rkhs: return "rkhs";
    case Mechanism::cloaking: return "cloaking";
    case Mechanism::simple_binning: return "simple_binning";
    case Mechanism::integral_binning: return "integral_binning";
  }
  return "unknown";
}

bool ExperimentConfig::is_private() const {
  if (mechanism == Mechanism::gp || noise_multiplier == 0.0) return false;
  return std::all_of(epsilons.begin(), epsilons.end(),
                     [](double e) { return std::isfinite(e); });
}

namespace {

double parse_epsilon(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "none") return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("epsilon must be a number, \"inf\" or null");
  }
  return j.get<double>();
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

KernelSpec parse_kernel(const nlohmann::json& j) {
  if (j.value("family", std::string("eq")) != "eq")
    throw std::invalid_argument("only the EQ kernel family is supported");
  KernelSpec k;
  k.variance = j.value("variance", 1.0);
  k.noise_variance = j.value("noise_variance", 0.0);
  const auto& ls = j.at("lengthscales");
  k.lengthscales = ls.is_array() ? to_vector(ls.get<std::vector<double>>())
                                 : Eigen::VectorXd::Constant(1, ls.get<double>());
  k.validate();
  return k;
}

FoldScheme parse_scheme(const std::string& s) {
  if (s == "monte_carlo") return FoldScheme::monte_carlo;
  if (s == "partition") return FoldScheme::partition;
  throw std::invalid_argument("unknown fold scheme '" + s + "'");
}

Eigen::MatrixXd parse_test_points(const nlohmann::json& j, const std::filesystem::path& base) {
  if (j.is_array()) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::invalid_argument("test_points is empty");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size())
        throw std::invalid_argument("test_points rows differ in length");
      for (std::size_t d = 0; d < rows[i].size(); ++d)
        X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
    }
    return X;
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    const auto low = g.at("low").get<std::vector<double>>();
    const auto high = g.at("high").get<std::vector<double>>();
    const auto count = g.at("count").get<std::vector<int>>();
    if (low.size() != high.size() || low.size() != count.size())
      throw std::invalid_argument("test grid low/high/count lengths differ");
    Eigen::Index total = 1;
    for (int c : count) {
      if (c < 1) throw std::invalid_argument("test grid counts must be positive");
      total *= c;
    }
    const auto D = static_cast<Eigen::Index>(low.size());
    Eigen::MatrixXd X(total, D);
    for (Eigen::Index r = 0; r < total; ++r) {
      Eigen::Index rem = r;
      for (Eigen::Index d = D - 1; d >= 0; --d) {
        const int c = count[static_cast<std::size_t>(d)];
        const Eigen::Index k = rem % c;
        rem /= c;
        const double lo = low[static_cast<std::size_t>(d)], hi = high[static_cast<std::size_t>(d)];
        X(r, d) = c == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / (c - 1);
      }
    }
    return X;
  }
  if (j.contains("csv")) {
    CsvSchema s;
    s.inputs = j.at("inputs").get<std::vector<std::string>>();
    s.output = s.inputs.front();
    const Dataset ds = ingest_csv(base / j.at("csv").get<std::string>(), s);
    return ds.X;
  }
  throw std::invalid_argument("test_points must be an array, a grid or a csv reference");
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.mechanism = parse_mechanism(j.at("mechanism").get<std::string>());

  const auto& data = j.at("data");
  if (data.contains("synthetic")) {
    const auto& s = data.at("synthetic");
    SyntheticSpec syn;
    syn.function = s.value("function", syn.function);
    syn.n = s.value("n", syn.n);
    syn.noise_std = s.value("noise_std", syn.noise_std);
    syn.seed = s.value("seed", syn.seed);
    c.synthetic = syn;
  } else {
    c.csv = base_dir / data.at("csv").get<std::string>();
    c.schema.inputs = data.at("inputs").get<std::vector<std::string>>();
    c.schema.output = data.at("output").get<std::string>();
  }
  const auto clip = j.at("clip").get<std::vector<double>>();
  if (clip.size() != 2 || !(clip[1] > clip[0]))
    throw std::invalid_argument("clip must be [low, high] with low < high");
  c.clip_low = clip[0];
  c.clip_high = clip[1];
  c.schema.clip_low = c.clip_low;
  c.schema.clip_high = c.clip_high;

  if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel"));

  if (j.contains("dp")) {
    const auto& dp = j.at("dp");
    c.delta = dp.value("delta", c.delta);
    if (dp.contains("epsilons")) {
      c.epsilons.clear();
      for (const auto& e : dp.at("epsilons")) c.epsilons.push_back(parse_epsilon(e));
    } else if (dp.contains("epsilon")) {
      c.epsilons = {parse_epsilon(dp.at("epsilon"))};
    }
    if (c.epsilons.empty()) throw std::invalid_argument("no epsilon configured");
  }
  c.noise_multiplier = j.value("noise_multiplier", 1.0);
  if (c.noise_multiplier < 0.0) throw std::invalid_argument("noise_multiplier must be >= 0");

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    HyperGrid grid;
    const double variance = g.value("variance", c.kernel.variance);
    const auto noises = g.value("noise_variances", std::vector<double>{c.kernel.noise_variance});
    for (const auto& ls : g.at("lengthscales")) {
      const Eigen::VectorXd l = ls.is_array() ? to_vector(ls.get<std::vector<double>>())
                                              : Eigen::VectorXd::Constant(
                                                    c.kernel.dims(), ls.get<double>());
      for (double nv : noises) grid.candidates.push_back(KernelSpec::eq(variance, l, nv));
    }
    grid.folds = g.value("folds", grid.folds);
    grid.select_epsilon = g.value("select_epsilon", grid.select_epsilon);
    grid.scheme = parse_scheme(g.value("scheme", std::string("monte_carlo")));
    grid.test_fraction = g.value("test_fraction", grid.test_fraction);
    if (g.contains("regression_epsilon")) {
      const double e = parse_epsilon(g.at("regression_epsilon"));
      if (std::isfinite(e)) grid.utility.release_dp = DPParams{e, c.delta, c.d()};
    }
    if (g.contains("sweep_epsilons"))
      for (const auto& e : g.at("sweep_epsilons")) c.selection_sweep.push_back(parse_epsilon(e));
    grid.validate();
    c.grid = grid;
  }

  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.learning_rate = o.value("learning_rate", c.optimizer.learning_rate);
    c.optimizer.tolerance = o.value("tolerance", c.optimizer.tolerance);
    c.optimizer.max_iterations = o.value("max_iterations", c.optimizer.max_iterations);
    c.optimizer.max_attempts = o.value("max_attempts", c.optimizer.max_attempts);
  }

  if (j.contains("bins")) c.bins = j.at("bins").get<std::vector<int>>();
  if (j.contains("bin_range"))
    for (const auto& r : j.at("bin_range")) {
      const auto v = r.get<std::vector<double>>();
      if (v.size() != 2) throw std::invalid_argument("bin_range entries are [low, high]");
      c.bin_range.emplace_back(v[0], v[1]);
    }

  c.folds = j.value("folds", c.folds);
  c.train_size = j.value("train_size", c.train_size);
  c.test_size = j.value("test_size", c.test_size);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  if (j.contains("test_points")) c.test_points = parse_test_points(j.at("test_points"), base_dir);
  c.seed = j.value("seed", c.seed);
  c.optimizer.seed = c.seed;
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

  if (c.folds < 1) throw std::invalid_argument("folds must be positive");
  if ((c.mechanism == Mechanism::simple_binning || c.mechanism == Mechanism::integral_binning) &&
      c.bins.empty())
    throw std::invalid_argument("binning mechanisms need a 'bins' entry");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

Dataset load_dataset(const ExperimentConfig& config) {
  Dataset ds;
  if (config.synthetic) {
    ds = make_synthetic(*config.synthetic);
  } else if (config.csv) {
    ds = ingest_csv(*config.csv, config.schema);
  } else {
    throw std::invalid_argument("config names no data source");
  }
  ds.clip_low = config.clip_low;
  ds.clip_high = config.clip_high;
  ds.y = ds.y.cwiseMax(config.clip_low).cwiseMin(config.clip_high);
  ds.offset = 0.0;
  return ds;
}

namespace {

std::vector<Eigen::VectorXd> bin_edges(const ExperimentConfig& config, const Dataset& data) {
  if (static_cast<Eigen::Index>(config.bins.size()) != data.dims())
    throw DimensionError("need one bin count per input dimension");
  std::vector<Eigen::VectorXd> edges;
  for (Eigen::Index d = 0; d < data.dims(); ++d) {
    double lo, hi;
    if (!config.bin_range.empty()) {
      lo = config.bin_range.at(static_cast<std::size_t>(d)).first;
      hi = config.bin_range.at(static_cast<std::size_t>(d)).second;
    } else {
      lo = data.X.col(d).minCoeff();
      hi = data.X.col(d).maxCoeff();
      if (!(hi > lo)) hi = lo + 1.0;
    }
    edges.push_back(uniform_edges(lo, hi, config.bins[static_cast<std::size_t>(d)]));
  }
  return edges;
}

// Noise-free kernel and data for the RKHS release: outputs are divided by
// the signal standard deviation so the kernel has unit variance.
struct Normalized {
  KernelSpec spec;
  double unit = 1.0;
};

Normalized normalize_for_rkhs(const KernelSpec& spec) {
  Normalized n;
  n.unit = std::sqrt(spec.variance);
  n.spec = spec;
  n.spec.variance = 1.0;
  n.spec.noise_variance = spec.noise_variance / spec.variance;
  return n;
}

struct FoldOutcome {
  std::vector<double> rmse;  // per epsilon
  std::vector<std::string> error;
  std::vector<MechanismInfo> info;
  std::vector<PredictionRow> rows;
  double occupied = std::numeric_limits<double>::quiet_NaN();
};

ReleaseResult non_private(const GPModel& model, const Eigen::MatrixXd& Xstar) {
  ReleaseResult r;
  r.mean = model.predict_mean(Xstar);
  r.predictions = r.mean;
  r.posterior_var = model.predict_var(Xstar);
  r.noise_std = Eigen::VectorXd::Zero(Xstar.rows());
  r.info.mechanism = "gp";
  r.info.noise_multiplier = 0.0;
  return r;
}

// Releases at Xstar from centered training data for every epsilon, in the
// centered units of `train`.
std::vector<ReleaseResult> release_all(const ExperimentConfig& config, const Dataset& train,
                                       const Dataset& full_extent, const Eigen::MatrixXd& Xstar,
                                       const std::vector<double>& epsilons, Rng& rng,
                                       double* occupied) {
  std::vector<ReleaseResult> out;
  const double d = config.d();
  switch (config.mechanism) {
    case Mechanism::gp: {
      const GPModel model = GPModel::fit(train.X, train.y, config.kernel);
      for (std::size_t i = 0; i < epsilons.size(); ++i) out.push_back(non_private(model, Xstar));
      break;
    }
    case Mechanism::rkhs: {
      const Normalized norm = normalize_for_rkhs(config.kernel);
      const GPModel model =
          GPModel::fit(train.X, (train.y / norm.unit).eval(), norm.spec);
      for (double eps : epsilons) {
        const RkhsRelease rel(model, Xstar, DPParams{eps, config.delta, d / norm.unit},
                              config.noise_multiplier);
        ReleaseResult r = rel.draw(rng);
        r.predictions *= norm.unit;
        r.mean *= norm.unit;
        r.noise_std *= norm.unit;
        r.posterior_var *= norm.unit * norm.unit;
        // Report the noise scale and sensitivity in output units.
        r.info.scale *= norm.unit;
        r.info.sensitivity *= norm.unit;
        r.info.dp.d = d;
        out.push_back(std::move(r));
      }
      break;
    }
    case Mechanism::cloaking: {
      const GPModel model = GPModel::fit(train.X, train.y, config.kernel);
      if (std::none_of(epsilons.begin(), epsilons.end(),
                       [](double e) { return std::isfinite(e); })) {
        // No finite budget: every release is the bare mean, skip the optimizer.
        for (std::size_t i = 0; i < epsilons.size(); ++i) {
          out.push_back(non_private(model, Xstar));
          out.back().info.mechanism = "cloaking";
          out.back().info.dp = DPParams{epsilons[i], config.delta, d};
        }
        break;
      }
      const CloakingSolution sol = solve_cloaking(model.cloaking_matrix(Xstar), config.optimizer);
      for (double eps : epsilons) {
        const CloakingRelease rel(model, Xstar, DPParams{eps, config.delta, d}, sol,
                                  config.noise_multiplier);
        out.push_back(rel.draw(rng));
      }
      break;
    }
    case Mechanism::simple_binning:
    case Mechanism::integral_binning: {
      const BinGrid grid = bin_data(train.X, train.y, bin_edges(config, full_extent));
      if (occupied) *occupied = grid.occupied_fraction();
      const BinnedPrediction clean = predict_binned(grid, grid.means, Xstar);
      for (double eps : epsilons) {
        const DPParams dp{eps, config.delta, d};
        const Eigen::VectorXd values = dp_bin_means(grid, dp, rng, config.noise_multiplier);
        ReleaseResult r;
        r.info.mechanism = to_string(config.mechanism);
        r.info.dp = dp;
        r.info.noise_multiplier = config.noise_multiplier;
        r.noise_std.resize(Xstar.rows());
        for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
          const Eigen::Index b = grid.locate(Xstar.row(i).transpose());
          const double count = b >= 0 ? grid.counts[b] : 0.0;
          r.noise_std[i] = count > 0 ? config.noise_multiplier * std::numbers::sqrt2 * d /
                                           (count * eps)
                                     : 0.0;
        }
        if (config.mechanism == Mechanism::simple_binning) {
          r.mean = clean.values;
          r.predictions = predict_binned(grid, values, Xstar).values;
        } else {
          const IntegralGP clean_gp(grid, grid.means, config.kernel,
                                    DPParams{std::numeric_limits<double>::infinity(),
                                             config.delta, d});
          const IntegralGP gp(grid, values, config.kernel, dp, config.noise_multiplier);
          r.mean = clean_gp.predict(Xstar);
          r.predictions = gp.predict(Xstar);
        }
        r.posterior_var = Eigen::VectorXd::Zero(Xstar.rows());
        out.push_back(std::move(r));
      }
      break;
    }
  }
  return out;
}

FoldOutcome run_fold(const ExperimentConfig& config, const Dataset& data, int fold) {
  FoldOutcome out;
  const std::size_t ne = config.epsilons.size();
  out.rmse.assign(ne, std::numeric_limits<double>::quiet_NaN());
  out.error.assign(ne, {});
  out.info.assign(ne, {});

  Rng rng = derived_rng(config.seed, static_cast<std::uint64_t>(fold));
  const Eigen::Index n = data.size();
  const Eigen::Index n_test =
      config.test_size > 0
          ? config.test_size
          : std::max<Eigen::Index>(1, std::llround(config.test_fraction * static_cast<double>(n)));
  const Eigen::Index n_train = config.train_size > 0 ? config.train_size : n - n_test;
  if (n_test + n_train > n || n_train < 1)
    throw std::invalid_argument("train_size + test_size exceeds the dataset");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::vector<Eigen::Index> test(order.begin(), order.begin() + n_test);
  const std::vector<Eigen::Index> train(order.begin() + n_test,
                                        order.begin() + n_test + n_train);

  const Dataset train_ds = clip_and_center(data.subset(train), config.clip_low, config.clip_high);
  const Dataset test_ds = data.subset(test);

  try {
    const auto releases =
        release_all(config, train_ds, data, test_ds.X, config.epsilons, rng, &out.occupied);
    for (std::size_t e = 0; e < ne; ++e) {
      const ReleaseResult& r = releases[e];
      const Eigen::VectorXd pred = (r.predictions.array() + train_ds.offset).matrix();
      if (!pred.allFinite()) {
        out.error[e] = "non-finite prediction";
        continue;
      }
      out.rmse[e] = rmse(pred, test_ds.y);
      out.info[e] = r.info;
      for (Eigen::Index i = 0; i < test_ds.size(); ++i) {
        PredictionRow row;
        row.fold = fold;
        row.epsilon = config.epsilons[e];
        row.x = test_ds.X.row(i).transpose();
        row.truth = test_ds.y[i];
        row.mean = r.mean[i] + train_ds.offset;
        row.prediction = pred[i];
        row.posterior_var = r.posterior_var[i];
        row.noise_std = r.noise_std[i];
        out.rows.push_back(std::move(row));
      }
    }
  } catch (const std::exception& ex) {
    for (auto& e : out.error) e = ex.what();
  }
  return out;
}

double nan_or(double v, bool ok) { return ok ? v : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data) {
  if (data.size() < 2) throw std::invalid_argument("dataset too small to cross-validate");
  if (config.kernel.dims() != data.dims() && config.mechanism != Mechanism::simple_binning)
    throw DimensionError("kernel lengthscales do not match the input dimension");

  std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(config.folds));
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < config.folds; start += static_cast<int>(workers)) {
    std::vector<std::future<FoldOutcome>> batch;
    const int stop = std::min(config.folds, start + static_cast<int>(workers));
    for (int f = start; f < stop; ++f)
      batch.push_back(std::async(std::launch::async, run_fold, std::cref(config),
                                 std::cref(data), f));
    for (int f = start; f < stop; ++f)
      outcomes[static_cast<std::size_t>(f)] = batch[static_cast<std::size_t>(f - start)].get();
  }

  ExperimentReport rep;
  rep.mechanism = config.mechanism;
  rep.d = config.d();
  rep.delta = config.delta;
  rep.not_private = !config.is_private();
  if (config.mechanism == Mechanism::rkhs)
    rep.c_delta = c_delta(config.delta, GaussianVariant::rkhs);
  else if (config.mechanism == Mechanism::cloaking)
    rep.c_delta = c_delta(config.delta, GaussianVariant::cloaking);

  double occupied_sum = 0.0;
  int occupied_n = 0;
  for (const auto& o : outcomes) {
    if (std::isfinite(o.occupied)) {
      occupied_sum += o.occupied;
      ++occupied_n;
    }
    rep.predictions.insert(rep.predictions.end(), o.rows.begin(), o.rows.end());
  }
  if (occupied_n > 0) rep.occupied_fraction = occupied_sum / occupied_n;

  for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
    EpsilonResult r;
    r.epsilon = config.epsilons[e];
    std::vector<double> ok;
    for (std::size_t f = 0; f < outcomes.size(); ++f) {
      const FoldOutcome& o = outcomes[f];
      const bool good = o.error[e].empty();
      r.fold_rmse.push_back(o.rmse[e]);
      if (good) {
        ok.push_back(o.rmse[e]);
      } else {
        ++r.failures;
        r.errors.push_back("fold " + std::to_string(f) + ": " + o.error[e]);
      }
      const MechanismInfo& info = o.info[e];
      const bool gauss = good && (config.mechanism == Mechanism::rkhs ||
                                  config.mechanism == Mechanism::cloaking);
      r.scale.push_back(nan_or(info.scale, gauss));
      r.sensitivity.push_back(nan_or(info.sensitivity, gauss));
      r.delta_achieved.push_back(
          nan_or(info.delta_achieved, good && config.mechanism == Mechanism::cloaking));
      r.bound_b.push_back(nan_or(info.bound_b, good && config.mechanism == Mechanism::rkhs));
    }
    if (2 * r.failures > config.folds)
      throw std::runtime_error("more than half of the folds failed at epsilon " +
                               std::to_string(r.epsilon) + "; first error: " +
                               r.errors.front());
    const double k = static_cast<double>(ok.size());
    r.mean_rmse = std::accumulate(ok.begin(), ok.end(), 0.0) / k;
    double ss = 0.0;
    for (double v : ok) ss += (v - r.mean_rmse) * (v - r.mean_rmse);
    const double sd = ok.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    r.ci_low = r.mean_rmse - 1.96 * sd / std::sqrt(k);
    r.ci_high = r.mean_rmse + 1.96 * sd / std::sqrt(k);
    rep.results.push_back(std::move(r));
  }
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, load_dataset(config));
}

ReleaseResult release_dataset(const ExperimentConfig& config, const Dataset& data,
                              double epsilon, Rng& rng) {
  if (config.test_points.size() == 0) throw std::invalid_argument("config has no test_points");
  if (config.test_points.cols() != data.dims())
    throw DimensionError("test_points dimension does not match the data");
  const Dataset centered = clip_and_center(data, config.clip_low, config.clip_high);
  ReleaseResult r = std::move(
      release_all(config, centered, data, config.test_points, {epsilon}, rng, nullptr).front());
  r.predictions.array() += centered.offset;
  r.mean.array() += centered.offset;
  return r;
}

namespace {

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json numbers(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

nlohmann::json numbers(const Eigen::VectorXd& v) {
  return numbers(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["mechanism"] = to_string(report.mechanism);
  if (report.not_private) j["warning"] = "NOT PRIVATE: noise disabled or epsilon infinite";
  j["privacy"] = {{"d", report.d},
                  {"delta", report.delta},
                  {"c_delta", number_or_null(report.c_delta)},
                  {"not_private", report.not_private}};
  if (std::isfinite(report.occupied_fraction)) {
    j["occupied_fraction"] = report.occupied_fraction;
    if (report.occupied_fraction < 1.0)
      j["empty_bins"] = "empty bins use the training population mean without noise";
  }
  j["results"] = nlohmann::json::array();
  for (const auto& r : report.results) {
    nlohmann::json e;
    e["epsilon"] = std::isfinite(r.epsilon) ? nlohmann::json(r.epsilon) : nlohmann::json("inf");
    e["mean_rmse"] = r.mean_rmse;
    e["ci95"] = {r.ci_low, r.ci_high};
    e["fold_rmse"] = numbers(r.fold_rmse);
    e["failures"] = r.failures;
    e["errors"] = r.errors;
    e["scale"] = numbers(r.scale);
    e["sensitivity"] = numbers(r.sensitivity);
    e["delta_achieved"] = numbers(r.delta_achieved);
    e["bound_b"] = numbers(r.bound_b);
    j["results"].push_back(std::move(e));
  }
  return j;
}

nlohmann::json release_to_json(const ReleaseResult& r, const ExperimentConfig& config) {
  nlohmann::json j;
  const MechanismInfo& i = r.info;
  const bool priv = i.noise_multiplier > 0.0 && std::isfinite(i.dp.epsilon) &&
                    i.mechanism != "gp";
  j["mechanism"] = i.mechanism;
  if (!priv) j["warning"] = "NOT PRIVATE: noise disabled or epsilon infinite";
  j["privacy"] = {{"epsilon", number_or_null(i.dp.epsilon)},
                  {"delta", i.dp.delta},
                  {"d", config.d()},
                  {"c_delta", i.c},
                  {"bound_b", i.bound_b},
                  {"sensitivity", i.sensitivity},
                  {"delta_achieved", i.delta_achieved},
                  {"scale", i.scale},
                  {"noise_multiplier", i.noise_multiplier},
                  {"not_private", !priv}};
  if (i.mechanism == "cloaking")
    j["note"] = "noise scaled by d * sqrt(delta_achieved) * c(delta) / epsilon";
  j["predictions"] = numbers(r.predictions);
  j["mean"] = numbers(r.mean);
  j["posterior_var"] = numbers(r.posterior_var);
  j["noise_std"] = numbers(r.noise_std);
  return j;
}

nlohmann::json selection_to_json(const Selection& s) {
  nlohmann::json j;
  j["drawn_index"] = s.index;
  j["utility_sensitivity"] = s.sensitivity;
  j["candidates"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    j["candidates"].push_back({{"utility", s.scores[i].utility},
                               {"sensitivity", s.scores[i].sensitivity},
                               {"probability", s.probabilities[static_cast<Eigen::Index>(i)]}});
  }
  j["selected"] = {{"variance", s.spec.variance},
                   {"lengthscales", numbers(s.spec.lengthscales)},
                   {"noise_variance", s.spec.noise_variance}};
  return j;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  const Eigen::Index D = rows.empty() ? 0 : rows.front().x.size();
  out << "fold,epsilon";
  for (Eigen::Index d = 0; d < D; ++d) out << ",x" << d;
  out << ",y_true,mean,prediction,posterior_var,noise_std\n";
  for (const auto& r : rows) {
    out << r.fold << ',' << (std::isfinite(r.epsilon) ? std::to_string(r.epsilon) : "inf");
    for (Eigen::Index d = 0; d < D; ++d) out << ',' << r.x[d];
    out << ',' << r.truth << ',' << r.mean << ',' << r.prediction << ',' << r.posterior_var
        << ',' << r.noise_std << '\n';
  }
}

void write_release_csv(const std::filesystem::path& path, const Eigen::MatrixXd& Xstar,
                       const ReleaseResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index d = 0; d < Xstar.cols(); ++d) out << 'x' << d << ',';
  out << "mean,posterior_var,noise_std,prediction\n";
  for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
    for (Eigen::Index d = 0; d < Xstar.cols(); ++d) out << Xstar(i, d) << ',';
    out << r.mean[i] << ',' << r.posterior_var[i] << ',' << r.noise_std[i] << ','
        << r.predictions[i] << '\n';
  }
}

Eigen::MatrixXd selection_probability_matrix(const Dataset& data, const HyperGrid& grid,
                                             const std::vector<double>& regression_epsilons,
                                             double delta, Rng& rng) {
  grid.validate();
  const Dataset centered = clip_and_center(data, data.clip_low, data.clip_high);
  const auto folds = make_folds(centered.size(), grid.folds, grid.scheme, grid.test_fraction, rng);
  const std::uint64_t release_seed = rng();
  Eigen::MatrixXd P(static_cast<Eigen::Index>(grid.candidates.size()),
                    static_cast<Eigen::Index>(regression_epsilons.size()));
  for (std::size_t e = 0; e < regression_epsilons.size(); ++e) {
    UtilityOptions opts;
    opts.release_seed = release_seed;
    if (std::isfinite(regression_epsilons[e]))
      opts.release_dp = DPParams{regression_epsilons[e], delta, centered.d()};
    Eigen::VectorXd u(P.rows());
    double sens = 0.0;
    for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
      const CandidateScore s = sse_utility(centered, grid.candidates[c], folds, opts);
      u[static_cast<Eigen::Index>(c)] = s.utility;
      sens = std::max(sens, s.sensitivity);
    }
    P.col(static_cast<Eigen::Index>(e)) =
        exponential_mechanism_probabilities(u, sens, grid.select_epsilon);
  }
  return P;
}

}  // namespace dpgp
