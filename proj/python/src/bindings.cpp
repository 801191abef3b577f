#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bhcoreset/coreset_solvers.hpp"
#include "bhcoreset/errors.hpp"
#include "bhcoreset/posterior_metrics.hpp"
#include "bhcoreset/serialization.hpp"

namespace py = pybind11;
using namespace bhc;

namespace {

GramMatrix as_gram(const Matrix& k) {
  if (k.rows() != k.cols()) throw InputError("Gram matrix must be square");
  GramMatrix g;
  g.k = k;
  return g;
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Reports go through the JSON serializers so Python sees the same fields as the CLI.
py::object as_dict(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayes-Hilbert coresets: CLR features, likelihood kernel, solvers and bound checks";
  m.attr("__version__") = BHC_VERSION;

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  auto numeric_error = py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<SolverError>(m, "SolverError", numeric_error.ptr());
  (void)input_error;

  // model_zoo
  py::enum_<ModelKind>(m, "ModelKind")
      .value("GaussianMean", ModelKind::GaussianMean)
      .value("Logistic", ModelKind::Logistic);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const RowMatrix& points, std::vector<int> labels) {
             Dataset d;
             d.points = points;
             d.labels = std::move(labels);
             d.source = "python";
             return d;
           }),
           py::arg("points"), py::arg("labels") = std::vector<int>{})
      .def_readonly("points", &Dataset::points)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("source", &Dataset::source)
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim);

  py::class_<LikelihoodModel>(m, "LikelihoodModel")
      .def_static("gaussian_mean", &LikelihoodModel::gaussian_mean, py::arg("dim"), py::arg("obs_variance") = 1.0)
      .def_static("logistic", &LikelihoodModel::logistic, py::arg("dim"))
      .def_property_readonly("kind", &LikelihoodModel::kind)
      .def_property_readonly("dim", &LikelihoodModel::dim)
      .def("log_likelihood",
           [](const LikelihoodModel& self, const Dataset& data, Index n, const Vector& theta) {
             if (n < 0 || n >= data.size()) throw InputError("point index out of range");
             return self.log_likelihood(data.point(n), as_span(theta));
           })
      .def("log_likelihood_sup", &LikelihoodModel::log_likelihood_sup)
      .def("check", &LikelihoodModel::check);

  py::class_<BaseMeasure>(m, "BaseMeasure")
      .def_static("standard_gaussian", &BaseMeasure::standard_gaussian)
      .def_static("gaussian", &BaseMeasure::gaussian, py::arg("mean"), py::arg("covariance"))
      .def_static("laplace", &BaseMeasure::laplace, py::arg("model"), py::arg("data"), py::arg("prior"))
      .def("truncated", &BaseMeasure::truncated, py::arg("lo"), py::arg("hi"))
      .def_property_readonly("mean", &BaseMeasure::mean)
      .def_property_readonly("covariance", &BaseMeasure::covariance)
      .def_property_readonly("tag", &BaseMeasure::tag)
      .def("log_density", [](const BaseMeasure& self, const Vector& t) { return self.log_density(as_span(t)); });

  m.def("generate_synthetic", &generate_synthetic, py::arg("model"), py::arg("count"), py::arg("seed"),
        py::arg("theta_star") = std::nullopt);
  m.def(
      "load_dataset",
      [](const std::filesystem::path& p, ModelKind kind, Index dim, bool header) {
        return load_dataset(p, {kind, dim, header});
      },
      py::arg("path"), py::arg("kind"), py::arg("dim"), py::arg("header") = false);
  m.def("write_dataset", &write_dataset);
  m.def(
      "sample_base", [](const BaseMeasure& b, Index count, std::uint64_t seed) { return sample_base(b, count, seed).values; },
      py::arg("base"), py::arg("count"), py::arg("seed"));

  // bhs_geometry
  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def_readonly("phi", &FeatureMatrix::phi)
      .def_readonly("column_means", &FeatureMatrix::column_means);
  m.def(
      "clr_features",
      [](const LikelihoodModel& model, const Dataset& data, const BaseMeasure& base, Index count, std::uint64_t seed) {
        return clr_features(model, data, sample_base(base, count, seed));
      },
      py::arg("model"), py::arg("data"), py::arg("base"), py::arg("samples"), py::arg("seed"));
  m.def(
      "centre_log_likelihoods", [](const Matrix& raw) { return centre_log_likelihoods(raw); }, py::arg("raw"));
  m.def("gram", [](const FeatureMatrix& f) { return gram(f).k; });
  m.def(
      "mmd_sq", [](const Matrix& k, const Vector& w) { return mmd_sq(as_gram(k), w); }, py::arg("gram"),
      py::arg("weights"));
  m.def("bhs_norm_sq_via_features", &bhs_norm_sq_via_features, py::arg("features"), py::arg("weights"));
  m.def("feature_norms", [](const Matrix& k) { return feature_norms(as_gram(k)); }, py::arg("gram"));

  // coreset_solvers
  py::enum_<FwVariant>(m, "FwVariant").value("Plain", FwVariant::Plain).value("AwayStep", FwVariant::AwayStep);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("M", &SolverConfig::M)
      .def_readwrite("T", &SolverConfig::T)
      .def_readwrite("tolerance", &SolverConfig::tolerance)
      .def_readwrite("seed", &SolverConfig::seed)
      .def_readwrite("fw_variant", &SolverConfig::fw_variant)
      .def_readwrite("power_iterations", &SolverConfig::power_iterations)
      .def_readwrite("backtracking", &SolverConfig::backtracking)
      .def_readwrite("max_halvings", &SolverConfig::max_halvings);

  py::class_<Coreset>(m, "Coreset")
      .def_readonly("weights", &Coreset::weights)
      .def_readonly("solver", &Coreset::solver)
      .def_readonly("seed", &Coreset::seed)
      .def_readonly("M", &Coreset::M)
      .def_readonly("trace", &Coreset::trace)
      .def_readonly("stop_reason", &Coreset::stop_reason)
      .def_readonly("warnings", &Coreset::warnings)
      .def("active_set", &Coreset::active_set)
      .def("to_json", [](const Coreset& c) { return to_json(c).dump(); });

  m.def(
      "frank_wolfe", [](const Matrix& k, const SolverConfig& c) { return frank_wolfe(as_gram(k), c); },
      py::arg("gram"), py::arg("config"));
  m.def(
      "iht", [](const Matrix& k, const SolverConfig& c) { return iht(as_gram(k), c); }, py::arg("gram"),
      py::arg("config"));
  m.def("uniform_subsample", &uniform_subsample, py::arg("N"), py::arg("M"), py::arg("seed"));
  m.def("hard_threshold", &hard_threshold, py::arg("w"), py::arg("M"));
  m.def("quasi_newton_kl", &quasi_newton_kl, py::arg("model"), py::arg("data"), py::arg("prior"),
        py::arg("subset"), py::arg("config"), py::arg("mcmc"));
  m.def(
      "coreset_posterior_logdensity",
      [](const LikelihoodModel& model, const Dataset& data, const BaseMeasure& prior, const Vector& w,
         const Vector& theta) { return coreset_posterior_logdensity(model, data, prior, w, as_span(theta)); },
      py::arg("model"), py::arg("data"), py::arg("prior"), py::arg("weights"), py::arg("theta"));

  // mcmc
  py::class_<McmcConfig>(m, "McmcConfig")
      .def(py::init<>())
      .def_readwrite("length", &McmcConfig::length)
      .def_readwrite("burn_in", &McmcConfig::burn_in)
      .def_readwrite("thin", &McmcConfig::thin)
      .def_readwrite("proposal_sd", &McmcConfig::proposal_sd)
      .def_readwrite("initial", &McmcConfig::initial)
      .def_readwrite("seed", &McmcConfig::seed);
  m.def(
      "rw_metropolis",
      [](const std::function<double(const Vector&)>& f, Index dim, const McmcConfig& cfg) {
        const auto r = rw_metropolis(
            [&](std::span<const double> t) { return f(Eigen::Map<const Vector>(t.data(), static_cast<Index>(t.size()))); },
            dim, cfg);
        py::dict out;
        out["samples"] = r.samples.values;
        out["acceptance_rate"] = r.acceptance_rate;
        out["ess"] = r.ess.ess;
        out["warnings"] = r.warnings;
        return out;
      },
      py::arg("log_target"), py::arg("dim"), py::arg("config"));

  // posterior_metrics
  m.def(
      "hellinger_1d",
      [](const Vector& a, const Vector& b, double lo, double hi) {
        return hellinger_1d(a, b, QuadratureGrid::uniform(lo, hi, a.size()));
      },
      py::arg("log_p"), py::arg("log_q"), py::arg("lo"), py::arg("hi"));
  m.def(
      "kl_1d",
      [](const Vector& a, const Vector& b, double lo, double hi) {
        return kl_1d(a, b, QuadratureGrid::uniform(lo, hi, a.size()));
      },
      py::arg("log_p"), py::arg("log_q"), py::arg("lo"), py::arg("hi"));
  m.def(
      "w1_1d",
      [](const Vector& a, const Vector& b, double lo, double hi) {
        return w1_1d(a, b, QuadratureGrid::uniform(lo, hi, a.size()));
      },
      py::arg("log_p"), py::arg("log_q"), py::arg("lo"), py::arg("hi"));
  m.def(
      "verify_bounds",
      [](const LikelihoodModel& model, const Dataset& data, const Vector& w, const BaseMeasure& base, double lo,
         double hi, Index points, Index samples, std::uint64_t seed) {
        return as_dict(to_json(verify_bounds(model, data, w, base, QuadratureGrid::uniform(lo, hi, points),
                                             sample_base(base, samples, seed))));
      },
      py::arg("model"), py::arg("data"), py::arg("weights"), py::arg("base"), py::arg("lo"), py::arg("hi"),
      py::arg("points") = 2001, py::arg("samples") = 5000, py::arg("seed") = 0);
  m.def("concentration_bound", &concentration_bound, py::arg("gamma"), py::arg("N"), py::arg("M"),
        py::arg("delta"));
  m.def(
      "concentration_experiment",
      [](const FeatureMatrix& f, Index M, double delta, Index trials, std::uint64_t seed) {
        return as_dict(to_json(concentration_experiment(f, M, delta, trials, seed)));
      },
      py::arg("features"), py::arg("M"), py::arg("delta"), py::arg("trials"), py::arg("seed"));
}
