#include <memory>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qdgf/cli.hpp"
#include "qdgf/concentration.hpp"
#include "qdgf/errors.hpp"
#include "qdgf/exemplars.hpp"
#include "qdgf/grid.hpp"
#include "qdgf/kernels.hpp"
#include "qdgf/operators.hpp"
#include "qdgf/rng.hpp"
#include "qdgf/sampling.hpp"
#include "qdgf/spectral.hpp"
#include "qdgf/tails.hpp"

namespace py = pybind11;
using namespace qdgf;

namespace {

// Grids are immutable in C++ but pybind11 holders need a non-const pointee.
using PyGrid = std::shared_ptr<Grid>;

PyGrid mutable_grid(const GridPtr& g) { return std::const_pointer_cast<Grid>(g); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian random fields conditioned on a large quadratic form";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<FieldKind>(m, "FieldKind").value("real", FieldKind::real).value("complex", FieldKind::complex);
  py::enum_<SamplingMethod>(m, "SamplingMethod")
      .value("automatic", SamplingMethod::automatic)
      .value("rejection", SamplingMethod::rejection)
      .value("tilted", SamplingMethod::tilted);
  py::enum_<TailMethod>(m, "TailMethod")
      .value("inversion", TailMethod::inversion)
      .value("closed_form", TailMethod::closed_form)
      .value("monte_carlo", TailMethod::monte_carlo);
  py::enum_<SpectrumPath>(m, "SpectrumPath")
      .value("automatic", SpectrumPath::automatic)
      .value("dense", SpectrumPath::dense)
      .value("low_rank", SpectrumPath::low_rank);

  // grid
  py::class_<Grid, PyGrid>(m, "Grid")
      .def_property_readonly("dim", &Grid::dim)
      .def_property_readonly("components", &Grid::components)
      .def_property_readonly("kind", &Grid::kind)
      .def_property_readonly("node_count", &Grid::node_count)
      .def_property_readonly("dof_count", &Grid::dof_count)
      .def_property_readonly("origin_node", &Grid::origin_node)
      .def("spacing", &Grid::spacing)
      .def("coordinates", &Grid::coordinates)
      .def_property_readonly("weights", [](const Grid& g) {
        return std::vector<double>(g.weights().begin(), g.weights().end());
      });
  m.def(
      "build_grid",
      [](int dim, std::vector<double> hw, std::vector<int> pts, int comps, FieldKind kind) {
        return mutable_grid(build_grid(dim, std::move(hw), std::move(pts), comps, kind));
      },
      py::arg("dim"), py::arg("half_widths"), py::arg("points"), py::arg("components") = 1,
      py::arg("kind") = FieldKind::complex);

  py::class_<Field>(m, "Field")
      .def(py::init([](const PyGrid& g, const Eigen::VectorXcd& v) { return Field(g, v); }))
      .def_property_readonly("grid", [](const Field& f) { return mutable_grid(f.grid_ptr()); })
      .def_property_readonly("values", &Field::values)
      .def("weighted", &Field::weighted)
      .def("norm", [](const Field& f) { return l2_norm(f); });
  m.def("inner_product", &inner_product);

  // kernels and operators
  py::class_<CovarianceKernel>(m, "CovarianceKernel").def_property_readonly("name", &CovarianceKernel::name);
  m.def("gaussian_kernel", &gaussian_kernel, py::arg("sigma"));
  m.def("exponential_kernel", &exponential_kernel, py::arg("corr_length"));
  py::class_<IsotropicFlowKernel>(m, "IsotropicFlowKernel").def("as_kernel", &IsotropicFlowKernel::as_kernel);
  m.def("flow_kernel", py::overload_cast<double, double>(&make_flow_kernel), py::arg("energy"),
        py::arg("taylor_scale"));

  py::class_<CovarianceOperator>(m, "CovarianceOperator")
      .def(py::init([](const PyGrid& g, const CovarianceKernel& k, bool decompose) {
             CovarianceAssembly a;
             a.materialize = true;
             a.decompose = decompose;
             return CovarianceOperator(g, k, a);
           }),
           py::arg("grid"), py::arg("kernel"), py::arg("decompose") = true)
      .def(py::init([](const PyGrid& g, const Eigen::MatrixXd& w) { return CovarianceOperator(g, w); }),
           py::arg("grid"), py::arg("weighted"))
      .def_property_readonly("dimension", &CovarianceOperator::dimension)
      .def("trace", &CovarianceOperator::trace)
      .def_property_readonly("weighted_matrix", &CovarianceOperator::weighted_matrix)
      .def_property_readonly("mode_eigenvalues", [](const CovarianceOperator& c) { return c.modes().mu; });

  py::class_<QuadraticForm>(m, "QuadraticForm")
      .def_static("dense", [](const PyGrid& g, const Eigen::MatrixXcd& w) { return QuadraticForm::dense(g, w); })
      .def_property_readonly("rank", &QuadraticForm::rank)
      .def_property_readonly("is_factored", &QuadraticForm::is_factored)
      .def("weighted_matrix", &QuadraticForm::weighted_matrix)
      .def("value", &QuadraticForm::value);
  m.def("point_intensity_form", [](const PyGrid& g) { return point_intensity_form(g); });
  m.def("helicity_form", [](const PyGrid& g) { return helicity_form(g); });
  m.def("identity_form", [](const PyGrid& g) { return identity_form(g); });

  // spectral
  py::class_<SignedSpectrum>(m, "SignedSpectrum")
      .def_readonly("positive", &SignedSpectrum::positive)
      .def_readonly("negative", &SignedSpectrum::negative)
      .def_readonly("g_plus", &SignedSpectrum::g_plus)
      .def_readonly("g_minus", &SignedSpectrum::g_minus)
      .def_readonly("trace_abs", &SignedSpectrum::trace_abs)
      .def_readonly("trace_product", &SignedSpectrum::trace_product)
      .def("values", &SignedSpectrum::values)
      .def("leading", &SignedSpectrum::leading);
  m.def(
      "build_m_spectrum",
      [](const CovarianceOperator& c, const QuadraticForm& o, SpectrumPath path, double tol_deg) {
        SpectrumOptions opts;
        opts.path = path;
        opts.tol_deg = tol_deg;
        return build_m_spectrum(c, o, opts);
      },
      py::arg("cov"), py::arg("form"), py::arg("path") = SpectrumPath::automatic, py::arg("tol_deg") = 1e-6);
  py::class_<CoEigenpairs>(m, "CoEigenpairs")
      .def_readonly("values", &CoEigenpairs::values)
      .def_readonly("betas", &CoEigenpairs::betas)
      .def_readonly("residuals", &CoEigenpairs::residuals)
      .def_readonly("g_plus", &CoEigenpairs::g_plus)
      .def_readonly("g_minus", &CoEigenpairs::g_minus);
  m.def(
      "restricted_co_spectrum",
      [](const CovarianceOperator& c, const QuadraticForm& o, const SignedSpectrum& sp) {
        return restricted_co_spectrum(c, o, sp);
      },
      py::arg("cov"), py::arg("form"), py::arg("spectrum"));
  m.def(
      "fundamental_profile_field",
      [](const SignedSpectrum& sp, const CovarianceOperator& c, int sign, int n) {
        return fundamental_basis(sp, c, sign).field(n);
      },
      py::arg("spectrum"), py::arg("cov"), py::arg("sign") = 1, py::arg("n") = 0);

  // sampling
  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("normal", &RngStream::normal)
      .def("uniform", &RngStream::uniform);
  py::class_<SpectralCoefficients>(m, "SpectralCoefficients")
      .def_readonly("kind", &SpectralCoefficients::kind)
      .def_readonly("values", &SpectralCoefficients::values);
  py::class_<SampleGeometry>(m, "SampleGeometry")
      .def_readonly("q", &SampleGeometry::q)
      .def_readonly("norm", &SampleGeometry::norm)
      .def_readonly("fundamental_norm", &SampleGeometry::fundamental_norm)
      .def_readonly("residual_norm", &SampleGeometry::residual_norm)
      .def_readonly("distance", &SampleGeometry::distance);
  py::class_<SpectralSampler>(m, "SpectralSampler")
      .def(py::init<const CovarianceOperator&, const SignedSpectrum&>(), py::keep_alive<1, 2>())
      .def_property_readonly("mode_count", &SpectralSampler::mode_count)
      .def_property_readonly("eigenvalues", &SpectralSampler::eigenvalues)
      .def("draw", &SpectralSampler::draw)
      .def("reconstruct", &SpectralSampler::reconstruct)
      .def("quadratic_value", &SpectralSampler::quadratic_value)
      .def("fundamental_projection", &SpectralSampler::fundamental_projection)
      .def("geometry", &SpectralSampler::geometry, py::arg("t"), py::arg("sign") = 1);
  m.def("tilt_parameter", &tilt_parameter, py::arg("eigenvalues"), py::arg("sign"), py::arg("u"), py::arg("kind"));

  py::class_<EnsembleSample>(m, "EnsembleSample")
      .def_readonly("t", &EnsembleSample::t)
      .def_readonly("q", &EnsembleSample::q)
      .def_readonly("weight", &EnsembleSample::weight);
  py::class_<ConditionalEnsemble>(m, "ConditionalEnsemble")
      .def_readonly("sign", &ConditionalEnsemble::sign)
      .def_readonly("threshold", &ConditionalEnsemble::threshold)
      .def_readonly("method", &ConditionalEnsemble::method)
      .def_readonly("theta", &ConditionalEnsemble::theta)
      .def_readonly("samples", &ConditionalEnsemble::samples)
      .def_readonly("acceptance_rate", &ConditionalEnsemble::acceptance_rate)
      .def_readonly("ess", &ConditionalEnsemble::ess)
      .def_readonly("tail_probability", &ConditionalEnsemble::tail_probability)
      .def_readonly("tail_error", &ConditionalEnsemble::tail_error);
  m.def(
      "conditional_ensemble",
      [](const SpectralSampler& s, int sign, double u, SamplingMethod method, std::size_t count, std::uint64_t seed,
         std::uint64_t stream) {
        RngStream rng(seed, stream);
        return conditional_ensemble(s, sign, u, method, count, rng);
      },
      py::arg("sampler"), py::arg("sign"), py::arg("u"), py::arg("method") = SamplingMethod::automatic,
      py::arg("count") = 1000, py::arg("seed") = 1, py::arg("stream") = 0);

  // concentration
  py::class_<ConcentrationPoint>(m, "ConcentrationPoint")
      .def_readonly("u", &ConcentrationPoint::u)
      .def_readonly("method", &ConcentrationPoint::method)
      .def_readonly("p_exceed", &ConcentrationPoint::p_exceed)
      .def_readonly("p_error", &ConcentrationPoint::p_error)
      .def_readonly("median_distance", &ConcentrationPoint::median_distance)
      .def_readonly("ess", &ConcentrationPoint::ess)
      .def_readonly("unreliable", &ConcentrationPoint::unreliable);
  py::class_<ConcentrationCurve>(m, "ConcentrationCurve")
      .def_readonly("sign", &ConcentrationCurve::sign)
      .def_readonly("epsilon", &ConcentrationCurve::epsilon)
      .def_readonly("points", &ConcentrationCurve::points);
  m.def("default_thresholds", &default_thresholds, py::arg("sampler"), py::arg("sign") = 1,
        py::arg("draws") = 100'000, py::arg("seed") = 1);
  m.def(
      "concentration_curve",
      [](const SpectralSampler& s, int sign, const std::vector<double>& u, double epsilon, std::size_t samples,
         std::uint64_t seed) {
        ConcentrationOptions o;
        o.epsilon = epsilon;
        o.samples_per_u = samples;
        o.seed = seed;
        return concentration_curve(s, sign, u, o);
      },
      py::arg("sampler"), py::arg("sign"), py::arg("u"), py::arg("epsilon") = 0.25, py::arg("samples") = 2000,
      py::arg("seed") = 1);

  // tails
  py::class_<EigenvalueProfile>(m, "EigenvalueProfile")
      .def_static("from_values", &EigenvalueProfile::from_values, py::arg("kind"), py::arg("values"),
                  py::arg("rel_tol") = 1e-12)
      .def_readonly("kind", &EigenvalueProfile::kind)
      .def_readonly("values", &EigenvalueProfile::values)
      .def_readonly("multiplicities", &EigenvalueProfile::multiplicities)
      .def("mean", &EigenvalueProfile::mean)
      .def("variance", &EigenvalueProfile::variance);
  py::class_<TailEstimate>(m, "TailEstimate")
      .def_readonly("value", &TailEstimate::value)
      .def_readonly("error", &TailEstimate::error);
  m.def(
      "tail_probability",
      [](const EigenvalueProfile& p, double u, TailMethod method, std::size_t draws, std::uint64_t seed) {
        TailOptions o;
        o.mc_draws = draws;
        o.seed = seed;
        return tail_probability(p, u, method, o);
      },
      py::arg("profile"), py::arg("u"), py::arg("method") = TailMethod::inversion, py::arg("mc_draws") = 1'000'000,
      py::arg("seed") = 12345);
  m.def("pdf_inversion", &pdf_inversion, py::arg("profile"), py::arg("v"));
  m.def("pdf_asymptotic", &pdf_asymptotic, py::arg("profile"), py::arg("v"));
  m.def(
      "tail_lower_bound", [](const EigenvalueProfile& p, double u, double alpha) {
        return tail_lower_bound(p, u, alpha).bound;
      },
      py::arg("profile"), py::arg("u"), py::arg("alpha") = 0.5);
  py::class_<AsymptoticOnset>(m, "AsymptoticOnset")
      .def_readonly("found", &AsymptoticOnset::found)
      .def_readonly("v_star", &AsymptoticOnset::v_star)
      .def_readonly("v", &AsymptoticOnset::v)
      .def_readonly("ratio", &AsymptoticOnset::ratio);
  m.def("asymptotic_onset", &asymptotic_onset, py::arg("profile"), py::arg("band") = 0.05, py::arg("points") = 120);

  // exemplars
  m.def(
      "point_prediction",
      [](const CovarianceKernel& k, const PyGrid& g) {
        const PointExemplarPrediction p = point_prediction(k, g);
        return py::make_tuple(p.lambda1, p.profile);
      },
      py::arg("kernel"), py::arg("grid"));
  m.def(
      "helicity_eigenvalues",
      [](double energy, double ell) {
        const HelicityExemplarPrediction p = helicity_eigenvalues(energy, ell);
        return py::make_tuple(p.lambda_plus, p.lambda_minus, p.degeneracy);
      },
      py::arg("energy"), py::arg("taylor_scale"));
  py::class_<CurlCurlReport>(m, "CurlCurlReport")
      .def_readonly("limit", &CurlCurlReport::limit)
      .def_readonly("h", &CurlCurlReport::h)
      .def_readonly("value", &CurlCurlReport::value)
      .def_readonly("error", &CurlCurlReport::error)
      .def_readonly("order", &CurlCurlReport::order);
  m.def("curl_curl_identity_check", &curl_curl_identity_check, py::arg("kernel"), py::arg("nu"), py::arg("h"));

  m.def(
      "run_cli", [](const std::vector<std::string>& args) { return cli::run(args); }, py::arg("args"),
      "Runs a qdgf experiment as the command-line tool would; returns its exit code.");
  m.attr("__version__") = QDGF_VERSION;
}
