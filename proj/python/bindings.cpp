#include "cli.hpp"

#include "ccrobust/calibration.hpp"
#include "ccrobust/distmodel.hpp"
#include "ccrobust/experiments.hpp"
#include "ccrobust/geometry.hpp"
#include "ccrobust/robust.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace ccrobust;
using json = nlohmann::json;

namespace {

NormSpec norm_arg(const std::string& name) { return NormSpec::parse(name); }

py::tuple pair(const ViolationPair& v) { return py::make_tuple(v.below, v.above); }

} // namespace

PYBIND11_MODULE(_ccrobust, m) {
    m.doc() = "Calibrated union-of-balls uncertainty sets, robust LPs and Monte-Carlo studies";
    m.attr("__version__") = std::string(cli::version());

    auto base = py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<EmptySampleError>(m, "EmptySampleError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_ValueError);
    py::register_exception<UndersampledError>(m, "UndersampledError", PyExc_RuntimeError);
    (void)base;

    // geometry
    m.def("norm_eval", [](const Vector& x, const std::string& norm) { return norm_eval(x, norm_arg(norm)); },
          py::arg("x"), py::arg("norm") = "l2");
    m.def("dual_norm_eval",
          [](const Vector& x, const std::string& norm) { return dual_norm_eval(x, norm_arg(norm)); }, py::arg("x"),
          py::arg("norm") = "l2");
    m.def("shape_value",
          [](const PointSet& centers, const Vector& u, const std::string& norm) {
              return shape_value(centers, norm_arg(norm), u);
          },
          py::arg("centers"), py::arg("u"), py::arg("norm") = "l2");

    py::class_<UncertaintySet>(m, "UncertaintySet")
        .def(py::init([](const PointSet& centers, double radius, const std::string& norm) {
                 return UncertaintySet(centers, radius, norm_arg(norm));
             }),
             py::arg("centers"), py::arg("radius"), py::arg("norm") = "l2")
        .def_property_readonly("centers", &UncertaintySet::centers)
        .def_property_readonly("radius", &UncertaintySet::radius)
        .def_property_readonly("norm", [](const UncertaintySet& s) { return std::string(s.norm().name()); })
        .def_property_readonly("dimension", &UncertaintySet::dimension)
        .def("__len__", &UncertaintySet::size)
        .def("contains", &UncertaintySet::contains, py::arg("u"))
        .def("__contains__", &UncertaintySet::contains)
        .def("with_radius", &UncertaintySet::with_radius, py::arg("radius"))
        .def("worst_case_linear", [](const UncertaintySet& s, const Vector& x) { return worst_case_linear(s, x); },
             py::arg("x"))
        .def("to_json", [](const UncertaintySet& s) { return json(s).dump(); })
        .def_static("from_json", [](const std::string& text) { return uncertainty_set_from_json(json::parse(text)); })
        .def("__repr__", [](const UncertaintySet& s) {
            std::ostringstream o;
            o << "UncertaintySet(balls=" << s.size() << ", dim=" << s.dimension() << ", radius=" << s.radius()
              << ", norm='" << s.norm().name() << "')";
            return o.str();
        });

    // calibration
    py::class_<CalibrationSpec>(m, "CalibrationSpec")
        .def(py::init([](double alpha, double epsilon, double delta, std::optional<double> lambda) {
                 return lambda ? CalibrationSpec(alpha, epsilon, delta, *lambda)
                               : CalibrationSpec::with_optimal_lambda(alpha, epsilon, delta);
             }),
             py::arg("alpha"), py::arg("epsilon"), py::arg("delta"), py::arg("lam") = py::none())
        .def_property_readonly("alpha", &CalibrationSpec::alpha)
        .def_property_readonly("epsilon", &CalibrationSpec::epsilon)
        .def_property_readonly("delta", &CalibrationSpec::delta)
        .def_property_readonly("lam", &CalibrationSpec::lambda)
        .def_property_readonly("alpha_n", &CalibrationSpec::alpha_n)
        .def_property_readonly("n_min", &CalibrationSpec::n_min)
        .def("with_alpha_n", &CalibrationSpec::with_alpha_n, py::arg("alpha_n"))
        .def("__repr__", [](const CalibrationSpec& s) { return "CalibrationSpec(" + json(s).dump() + ")"; });

    m.def("optimal_lambda", &optimal_lambda, py::arg("alpha"), py::arg("epsilon"));
    m.def("sample_size_constant", &sample_size_constant, py::arg("lam"), py::arg("alpha"), py::arg("epsilon"));
    m.def("sample_size", &sample_size, py::arg("alpha"), py::arg("epsilon"), py::arg("delta"), py::arg("lam"));
    m.def("order_statistic_rank", &order_statistic_rank, py::arg("n"), py::arg("gamma"));
    m.def("empirical_quantile",
          [](std::vector<double> values, double gamma) {
              return empirical_quantile(TrainingScores(std::move(values)), gamma);
          },
          py::arg("values"), py::arg("gamma"));
    m.def("chernoff_violation_bounds",
          [](std::uint64_t n, double a, double e, double an) { return pair(chernoff_violation_bounds(n, a, e, an)); },
          py::arg("n"), py::arg("alpha"), py::arg("epsilon"), py::arg("alpha_n"),
          "(below, above) Chernoff bounds on the two violation probabilities");
    m.def("exact_violation_probs",
          [](std::uint64_t n, double a, double e, double an) { return pair(exact_violation_probs(n, a, e, an)); },
          py::arg("n"), py::arg("alpha"), py::arg("epsilon"), py::arg("alpha_n"),
          "(below, above) exact binomial violation probabilities");
    m.def(
        "calibrate_radius",
        [](const PointSet& centers, const PointSet& training, const CalibrationSpec& spec, const std::string& norm,
           bool strict) {
            const CalibrationResult r = calibrate_radius(centers, norm_arg(norm), training, spec,
                                                         strict ? SampleSizePolicy::Strict : SampleSizePolicy::Advisory);
            return py::make_tuple(r.set, r.warning);
        },
        py::arg("centers"), py::arg("training"), py::arg("spec"), py::arg("norm") = "l2", py::arg("strict") = true,
        "Returns (UncertaintySet, warning or None).");
    m.def(
        "calibrate_radius_at_level",
        [](const PointSet& centers, const PointSet& training, double level, const std::string& norm) {
            return calibrate_radius_at_level(centers, norm_arg(norm), training, level);
        },
        py::arg("centers"), py::arg("training"), py::arg("level"), py::arg("norm") = "l2");

    // distributions
    py::class_<GaussianMixture>(m, "GaussianMixture")
        .def(py::init<std::vector<double>, std::vector<Vector>, std::vector<Eigen::MatrixXd>>(), py::arg("weights"),
             py::arg("means"), py::arg("covariances"))
        .def_property_readonly("dimension", &GaussianMixture::dimension)
        .def_property_readonly("weights", &GaussianMixture::weights)
        .def("__len__", &GaussianMixture::size)
        .def("density", &GaussianMixture::density, py::arg("u"))
        .def("log_density", &GaussianMixture::log_density, py::arg("u"))
        .def("to_json", [](const GaussianMixture& g) { return json(g).dump(); })
        .def_static("from_json", [](const std::string& text) { return gaussian_mixture_from_json(json::parse(text)); });

    m.def("bundled_mixture", [](const std::string& name) { return bundled_mixture(parse_bundled_mixture(name)); },
          py::arg("name"));
    m.def(
        "sample",
        [](const GaussianMixture& mix, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
            return sample(mix, RandomStream(seed, stream), n);
        },
        py::arg("mixture"), py::arg("n"), py::arg("seed") = 0, py::arg("stream") = 0);
    m.def("true_ball_mass", &true_ball_mass, py::arg("mixture"), py::arg("set"));

    // experiments
    m.def(
        "estimate_coverage",
        [](const UncertaintySet& set, const GaussianMixture& mix, std::uint64_t n, std::uint64_t seed,
           std::uint64_t stream) { return estimate_coverage(set, mix, n, RandomStream(seed, stream)); },
        py::arg("set"), py::arg("mixture"), py::arg("n_samples"), py::arg("seed") = 0, py::arg("stream") = 0);
    m.def(
        "run_consistency_experiment",
        [](const GaussianMixture& mix, const CalibrationSpec& spec, Eigen::Index balls, std::size_t trials,
           std::uint64_t coverage_samples, std::uint64_t seed, const std::string& norm, unsigned threads) {
            ConsistencyConfig cfg{mix, balls, spec};
            cfg.trials = trials;
            cfg.coverage_samples = coverage_samples;
            cfg.seed = seed;
            cfg.norm = norm_arg(norm);
            cfg.threads = threads;
            CoverageReport r;
            {
                py::gil_scoped_release release;
                r = run_consistency_experiment(cfg);
            }
            py::dict out;
            out["coverage"] = r.coverage;
            out["radii"] = r.radii;
            out["p05"] = r.p05;
            out["p50"] = r.p50;
            out["p95"] = r.p95;
            out["fraction_in_band"] = r.fraction_in_band;
            out["training_size"] = r.training_size;
            out["shape_sample"] = r.shape_sample;
            return out;
        },
        py::arg("mixture"), py::arg("spec"), py::arg("m") = 10, py::arg("trials") = 200,
        py::arg("coverage_samples") = 100000, py::arg("seed") = 0, py::arg("norm") = "l2", py::arg("threads") = 1);

    // robust programs travel as JSON text; the package wrapper converts to dicts
    m.def("_solve_json", [](const std::string& model) { return json(solve(robust_program_from_json(json::parse(model)))).dump(); });
    m.def("_bundled_example_json", [](double radius) { return json(bundled_example_program(radius)).dump(); },
          py::arg("radius") = 0.1);

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
