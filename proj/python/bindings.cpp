#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "dpgp/baselines.hpp"
#include "dpgp/cloaking.hpp"
#include "dpgp/dp_rkhs.hpp"
#include "dpgp/error.hpp"
#include "dpgp/harness.hpp"
#include "dpgp/hyperparam.hpp"

namespace py = pybind11;
using namespace dpgp;

namespace {

py::dict release_dict(const ReleaseResult& r) {
  py::dict d;
  d["predictions"] = r.predictions;
  d["mean"] = r.mean;
  d["posterior_var"] = r.posterior_var;
  d["noise_std"] = r.noise_std;
  d["mechanism"] = r.info.mechanism;
  d["epsilon"] = r.info.dp.epsilon;
  d["delta"] = r.info.dp.delta;
  d["d"] = r.info.dp.d;
  d["c_delta"] = r.info.c;
  d["bound_b"] = r.info.bound_b;
  d["sensitivity"] = r.info.sensitivity;
  d["delta_achieved"] = r.info.delta_achieved;
  d["scale"] = r.info.scale;
  return d;
}

FindLambdasOptions options(double lr, double tol, int iters, int attempts, std::uint64_t seed) {
  FindLambdasOptions o;
  o.learning_rate = lr;
  o.tolerance = tol;
  o.max_iterations = iters;
  o.max_attempts = attempts;
  o.seed = seed;
  return o;
}

}  // namespace

PYBIND11_MODULE(_dpgp, m) {
  m.doc() = "Differentially private GP regression: RKHS and cloaking releases, binning baselines";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefinite", PyExc_ArithmeticError);
  py::register_exception<NotDiagonallyDominant>(m, "NotDiagonallyDominant", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init([](double variance, Eigen::VectorXd lengthscales, double noise_variance) {
             KernelSpec k = KernelSpec::eq(variance, std::move(lengthscales), noise_variance);
             k.validate();
             return k;
           }),
           py::arg("variance"), py::arg("lengthscales"), py::arg("noise_variance") = 0.0)
      .def_readwrite("variance", &KernelSpec::variance)
      .def_readwrite("lengthscales", &KernelSpec::lengthscales)
      .def_readwrite("noise_variance", &KernelSpec::noise_variance)
      .def("__repr__", [](const KernelSpec& k) {
        return "KernelSpec(variance=" + std::to_string(k.variance) +
               ", dims=" + std::to_string(k.dims()) +
               ", noise_variance=" + std::to_string(k.noise_variance) + ")";
      });

  py::class_<DPParams>(m, "DPParams")
      .def(py::init([](double eps, double delta, double d) {
             DPParams p{eps, delta, d};
             p.validate();
             return p;
           }),
           py::arg("epsilon"), py::arg("delta"), py::arg("d"))
      .def_readonly("epsilon", &DPParams::epsilon)
      .def_readonly("delta", &DPParams::delta)
      .def_readonly("d", &DPParams::d);

  m.def("gram", &gram, py::arg("spec"), py::arg("X"));
  m.def("cross", &cross, py::arg("spec"), py::arg("Xstar"), py::arg("X"));

  py::class_<GPModel>(m, "GPModel")
      .def_static("fit", &GPModel::fit, py::arg("X"), py::arg("y"), py::arg("spec"))
      .def("predict_mean", &GPModel::predict_mean)
      .def("predict_cov", &GPModel::predict_cov)
      .def("predict_var", &GPModel::predict_var)
      .def("cloaking_matrix", &GPModel::cloaking_matrix)
      .def("inverse_covariance", &GPModel::inverse_covariance)
      .def_property_readonly("alpha", &GPModel::alpha)
      .def_property_readonly("size", &GPModel::size);

  m.def("c_delta", [](double delta, const std::string& variant) {
    if (variant != "rkhs" && variant != "cloaking")
      throw py::value_error("variant must be 'rkhs' or 'cloaking'");
    return c_delta(delta, variant == "rkhs" ? GaussianVariant::rkhs : GaussianVariant::cloaking);
  }, py::arg("delta"), py::arg("variant"));
  m.def("bound_b", &bound_b, py::arg("Kinv"), py::arg("nonneg_kernel") = true);
  m.def("varah_bound", &varah_bound, py::arg("J"));

  m.def("release_rkhs", [](const GPModel& model, const Eigen::MatrixXd& Xstar, const DPParams& dp,
                           std::uint64_t seed) {
    Rng rng(seed);
    return release_dict(release_rkhs(model, Xstar, dp, rng));
  }, py::arg("model"), py::arg("Xstar"), py::arg("dp"), py::arg("seed") = 0);

  m.def("calc_M", &calc_M, py::arg("lambdas"), py::arg("C"));
  m.def("calc_delta", &calc_delta, py::arg("lambdas"), py::arg("C"));
  m.def("grad_lambda", &grad_lambda, py::arg("lambdas"), py::arg("C"));
  m.def("find_lambdas", [](const Eigen::MatrixXd& C, double lr, double tol, int iters, int attempts,
                           std::uint64_t seed) {
    const CloakingSolution s = solve_cloaking(C, options(lr, tol, iters, attempts, seed));
    py::dict d;
    d["lambdas"] = s.lambdas;
    d["M"] = s.M;
    d["delta_achieved"] = s.delta_achieved;
    d["log_det_M"] = s.log_det_M;
    d["iterations"] = s.iterations;
    d["attempts"] = s.attempts;
    return d;
  }, py::arg("C"), py::arg("learning_rate") = 0.05, py::arg("tolerance") = 1e-5,
     py::arg("max_iterations") = 50000, py::arg("max_attempts") = 5, py::arg("seed") = 0);
  m.def("release_cloaking", [](const GPModel& model, const Eigen::MatrixXd& Xstar,
                               const DPParams& dp, std::uint64_t seed) {
    Rng rng(seed);
    FindLambdasOptions o;
    o.seed = seed;
    return release_dict(release_cloaking(model, Xstar, dp, rng, o));
  }, py::arg("model"), py::arg("Xstar"), py::arg("dp"), py::arg("seed") = 0);

  m.def("sse_sensitivity", &sse_sensitivity, py::arg("fold_max_col_norm_sq"), py::arg("d"));
  m.def("exponential_mechanism_probabilities", &exponential_mechanism_probabilities,
        py::arg("utilities"), py::arg("sensitivity"), py::arg("epsilon"));
  m.def("exponential_mechanism", [](const Eigen::VectorXd& u, double sens, double eps,
                                    std::uint64_t seed) {
    Rng rng(seed);
    return exponential_mechanism(u, sens, eps, rng);
  }, py::arg("utilities"), py::arg("sensitivity"), py::arg("epsilon"), py::arg("seed") = 0);

  m.def("dp_bin_means", [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<Eigen::VectorXd> edges, const DPParams& dp,
                           std::uint64_t seed) {
    const BinGrid g = bin_data(X, y, std::move(edges));
    Rng rng(seed);
    py::dict d;
    d["counts"] = Eigen::VectorXi(g.counts);
    d["means"] = g.means;
    d["dp_means"] = dp_bin_means(g, dp, rng);
    d["population_mean"] = g.population_mean;
    return d;
  }, py::arg("X"), py::arg("y"), py::arg("edges"), py::arg("dp"), py::arg("seed") = 0);
  m.def("integral_kernel", [](const KernelSpec& spec, const Eigen::VectorXd& a_low,
                              const Eigen::VectorXd& a_high, const Eigen::VectorXd& b_low,
                              const Eigen::VectorXd& b_high) {
    return integral_kernel_eval(spec, Box{a_low, a_high}, Box{b_low, b_high});
  }, py::arg("spec"), py::arg("a_low"), py::arg("a_high"), py::arg("b_low"), py::arg("b_high"));

  m.def("_run_experiment_json", [](const std::string& text) {
    const ExperimentConfig c = parse_config(nlohmann::json::parse(text));
    ExperimentReport r;
    {
      py::gil_scoped_release release;
      r = run_experiment(c);
    }
    return report_to_json(r).dump();
  });
  m.def("_hpselect_json", [](const std::string& text, long long seed) {
    ExperimentConfig c = parse_config(nlohmann::json::parse(text));
    if (!c.grid) throw py::value_error("config has no 'grid' section");
    if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
    const Dataset data = clip_and_center(load_dataset(c), c.clip_low, c.clip_high);
    Rng rng(c.seed);
    return selection_to_json(select_hyperparameters(data, *c.grid, rng)).dump();
  });
}
