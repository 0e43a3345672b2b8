#include "dpgp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "dpgp/error.hpp"

namespace dpgp {

double BinGrid::occupied_fraction() const {
  if (bins() == 0) return 0.0;
  return static_cast<double>((counts.array() > 0).count()) / static_cast<double>(bins());
}

Eigen::Index BinGrid::locate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dims()) throw DimensionError("point dimension does not match the bin grid");
  Eigen::Index flat = 0;
  for (Eigen::Index d = 0; d < dims(); ++d) {
    const Eigen::VectorXd& e = edges[static_cast<std::size_t>(d)];
    const Eigen::Index nb = e.size() - 1;
    const double v = x[d];
    if (!(v >= e[0] && v <= e[nb])) return -1;
    Eigen::Index i = std::upper_bound(e.data(), e.data() + e.size(), v) - e.data() - 1;
    i = std::min(i, nb - 1);  // the top edge belongs to the last bin
    flat = flat * nb + i;
  }
  return flat;
}

namespace {

std::vector<Eigen::Index> unflatten(const BinGrid& g, Eigen::Index bin) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(g.dims()));
  for (Eigen::Index d = g.dims() - 1; d >= 0; --d) {
    const Eigen::Index nb = g.edges[static_cast<std::size_t>(d)].size() - 1;
    idx[static_cast<std::size_t>(d)] = bin % nb;
    bin /= nb;
  }
  return idx;
}

}  // namespace

Eigen::VectorXd BinGrid::box_low(Eigen::Index bin) const {
  const auto idx = unflatten(*this, bin);
  Eigen::VectorXd v(dims());
  for (Eigen::Index d = 0; d < dims(); ++d)
    v[d] = edges[static_cast<std::size_t>(d)][idx[static_cast<std::size_t>(d)]];
  return v;
}

Eigen::VectorXd BinGrid::box_high(Eigen::Index bin) const {
  const auto idx = unflatten(*this, bin);
  Eigen::VectorXd v(dims());
  for (Eigen::Index d = 0; d < dims(); ++d)
    v[d] = edges[static_cast<std::size_t>(d)][idx[static_cast<std::size_t>(d)] + 1];
  return v;
}

Eigen::VectorXd uniform_edges(double low, double high, int bins) {
  if (bins < 1 || !(high > low)) throw std::invalid_argument("invalid bin range");
  return Eigen::VectorXd::LinSpaced(bins + 1, low, high);
}

BinGrid bin_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 std::vector<Eigen::VectorXd> edges) {
  if (edges.empty()) throw DimensionError("bin grid has no dimensions");
  if (static_cast<Eigen::Index>(edges.size()) != X.cols())
    throw DimensionError("bin grid has " + std::to_string(edges.size()) +
                         " dimensions but inputs have " + std::to_string(X.cols()));
  if (y.size() != X.rows()) throw DimensionError("inputs and outputs differ in length");
  if (X.rows() < 1) throw std::invalid_argument("no points to bin");

  Eigen::Index total = 1;
  for (const auto& e : edges) {
    if (e.size() < 2) throw std::invalid_argument("each dimension needs at least one bin");
    for (Eigen::Index i = 1; i < e.size(); ++i)
      if (!(e[i] > e[i - 1])) throw std::invalid_argument("bin edges must be strictly increasing");
    total *= e.size() - 1;
  }

  BinGrid g;
  g.edges = std::move(edges);
  g.counts = Eigen::VectorXi::Zero(total);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(total);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::Index b = g.locate(X.row(i).transpose());
    if (b < 0) {
      std::ostringstream msg;
      msg << "point " << i << " (" << X.row(i) << ") lies outside the bin grid";
      throw std::out_of_range(msg.str());
    }
    g.counts[b] += 1;
    sums[b] += y[i];
  }
  g.population_mean = y.mean();
  g.means.resize(total);
  for (Eigen::Index b = 0; b < total; ++b)
    g.means[b] = g.counts[b] > 0 ? sums[b] / g.counts[b] : g.population_mean;
  return g;
}

Eigen::VectorXd dp_bin_means(const BinGrid& grid, const DPParams& dp, Rng& rng,
                             double noise_multiplier) {
  dp.validate();
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd out(grid.bins());
  for (Eigen::Index b = 0; b < grid.bins(); ++b) {
    if (grid.counts[b] == 0) {
      out[b] = grid.population_mean;
      continue;
    }
    const double scale = dp.d / (grid.counts[b] * dp.epsilon);
    // The difference of two unit exponentials is standard Laplace.
    const double laplace = expo(rng) - expo(rng);
    out[b] = grid.means[b] + noise_multiplier * scale * laplace;
  }
  return out;
}

BinnedPrediction predict_binned(const BinGrid& grid, const Eigen::VectorXd& bin_values,
                                const Eigen::MatrixXd& Xstar) {
  if (bin_values.size() != grid.bins()) throw DimensionError("one value per bin expected");
  BinnedPrediction out;
  out.values.resize(Xstar.rows());
  out.out_of_range.assign(static_cast<std::size_t>(Xstar.rows()), false);
  for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
    const Eigen::Index b = grid.locate(Xstar.row(i).transpose());
    if (b < 0) {
      out.values[i] = grid.population_mean;
      out.out_of_range[static_cast<std::size_t>(i)] = true;
    } else {
      out.values[i] = bin_values[b];
    }
  }
  return out;
}

namespace {

// F(u) = int_0^u exp(-v^2 / (2 l^2)) dv
double eq_first_antiderivative(double u, double l) {
  return l * std::sqrt(std::numbers::pi / 2.0) * std::erf(u / (std::numbers::sqrt2 * l));
}

// G(u) = int_0^u F(v) dv
double eq_second_antiderivative(double u, double l) {
  return u * eq_first_antiderivative(u, l) + l * l * std::expm1(-u * u / (2.0 * l * l));
}

double double_integral_1d(double a1, double b1, double a2, double b2, double l) {
  return eq_second_antiderivative(b1 - a2, l) - eq_second_antiderivative(b1 - b2, l) -
         eq_second_antiderivative(a1 - a2, l) + eq_second_antiderivative(a1 - b2, l);
}

void check_box(const KernelSpec& spec, const Box& box) {
  if (box.low.size() != spec.dims() || box.high.size() != spec.dims())
    throw DimensionError("box dimension does not match the kernel");
  for (Eigen::Index d = 0; d < spec.dims(); ++d)
    if (!(box.high[d] > box.low[d])) throw std::invalid_argument("box has zero width");
}

double volume(const Box& b) { return (b.high - b.low).prod(); }

}  // namespace

double integral_kernel_eval(const KernelSpec& spec, const Box& a, const Box& b) {
  check_box(spec, a);
  check_box(spec, b);
  double v = spec.variance;
  for (Eigen::Index d = 0; d < spec.dims(); ++d)
    v *= double_integral_1d(a.low[d], a.high[d], b.low[d], b.high[d], spec.lengthscales[d]);
  return v;
}

double integral_point_cross(const KernelSpec& spec, const Box& box,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_box(spec, box);
  if (x.size() != spec.dims()) throw DimensionError("point dimension does not match kernel");
  double v = spec.variance;
  for (Eigen::Index d = 0; d < spec.dims(); ++d) {
    const double l = spec.lengthscales[d];
    v *= eq_first_antiderivative(x[d] - box.low[d], l) -
         eq_first_antiderivative(x[d] - box.high[d], l);
  }
  return v;
}

IntegralGP::IntegralGP(const BinGrid& grid, const Eigen::VectorXd& bin_values,
                       const KernelSpec& spec, const DPParams& dp, double noise_multiplier)
    : spec_(spec) {
  spec_.validate();
  dp.validate();
  if (bin_values.size() != grid.bins()) throw DimensionError("one value per bin expected");
  if (spec_.dims() != grid.dims()) throw DimensionError("kernel and grid dimensions differ");

  std::vector<Eigen::Index> used;
  for (Eigen::Index b = 0; b < grid.bins(); ++b)
    if (grid.counts[b] > 0) used.push_back(b);
  if (used.empty()) throw std::invalid_argument("no occupied bins to fit");

  const auto m = static_cast<Eigen::Index>(used.size());
  boxes_.reserve(used.size());
  for (Eigen::Index b : used) boxes_.push_back({grid.box_low(b), grid.box_high(b)});

  Eigen::MatrixXd K(m, m);
  Eigen::VectorXd obs(m);
  prior_mean_ = grid.population_mean;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double vi = volume(boxes_[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double vj = volume(boxes_[static_cast<std::size_t>(j)]);
      K(i, j) = integral_kernel_eval(spec_, boxes_[static_cast<std::size_t>(i)],
                                     boxes_[static_cast<std::size_t>(j)]) /
                (vi * vj);
      K(j, i) = K(i, j);
    }
    const double count = grid.counts[used[static_cast<std::size_t>(i)]];
    const double laplace_scale = noise_multiplier * dp.d / (count * dp.epsilon);
    K(i, i) += spec_.noise_variance / count + 2.0 * laplace_scale * laplace_scale;
    obs[i] = bin_values[used[static_cast<std::size_t>(i)]] - prior_mean_;
  }

  const Eigen::MatrixXd L = cholesky_with_jitter(K, 1e-8 * spec_.variance);
  const auto Lv = L.triangularView<Eigen::Lower>();
  weights_ = Lv.transpose().solve(Lv.solve(obs));
}

Eigen::VectorXd IntegralGP::predict(const Eigen::MatrixXd& Xstar) const {
  if (Xstar.cols() != spec_.dims()) throw DimensionError("test inputs have wrong dimension");
  Eigen::VectorXd out(Xstar.rows());
  for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < boxes_.size(); ++j)
      s += integral_point_cross(spec_, boxes_[j], Xstar.row(i).transpose()) /
           volume(boxes_[j]) * weights_[static_cast<Eigen::Index>(j)];
    out[i] = prior_mean_ + s;
  }
  return out;
}

}  // namespace dpgp
