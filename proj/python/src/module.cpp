#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/eigen.h>

#include "statsep/analytic.hpp"
#include "statsep/config.hpp"
#include "statsep/metrics.hpp"
#include "statsep/pipeline.hpp"
#include "statsep/separation.hpp"
#include "statsep/synthdata.hpp"
#include "statsep/wph.hpp"

namespace py = pybind11;
using namespace statsep;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<py::ssize_t> dims(std::initializer_list<std::size_t> n) {
  std::vector<py::ssize_t> d;
  for (auto v : n) d.push_back(static_cast<py::ssize_t>(v));
  return d;
}

Field2D to_field(const RealArray& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "expected a 2-D array");
  const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
  Field2D f(h, w);
  std::copy(a.data(), a.data() + a.size(), f.data());
  return f;
}

py::array_t<double> to_array(const Field2D& f) {
  py::array_t<double> out(dims({f.height(), f.width()}));
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

py::array_t<std::complex<double>> to_array(std::span<const cplx> v) {
  py::array_t<std::complex<double>> out(dims({v.size()}));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ClassMask mask_from(const std::optional<std::string>& classes) {
  return classes ? ClassMask::parse(*classes) : ClassMask::all();
}

py::dict trace_dict(const SeparationTrace& t) {
  std::vector<std::size_t> stage, iteration;
  std::vector<double> loss, grad, wall;
  for (const auto& r : t.rows) {
    stage.push_back(r.stage), iteration.push_back(r.iteration);
    loss.push_back(r.loss), grad.push_back(r.grad_norm), wall.push_back(r.wall_ms);
  }
  py::dict d;
  d["stage"] = stage;
  d["iteration"] = iteration;
  d["loss"] = loss;
  d["grad_norm"] = grad;
  d["wall_ms"] = wall;
  d["warnings"] = t.warnings;
  d["fallback_steps"] = t.fallback_steps;
  d["aborted"] = t.aborted;
  d["abort_message"] = t.abort_message;
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["psnr_db"] = r.psnr_db;
  d["psnr_input_db"] = r.psnr_input_db;
  py::dict rel, rel_in;
  for (const auto& [c, v] : r.rel_err_by_class) rel[py::str(to_string(c))] = v;
  for (const auto& [c, v] : r.rel_err_input_by_class) rel_in[py::str(to_string(c))] = v;
  d["rel_err"] = rel;
  d["rel_err_input"] = rel_in;
  d["rmse_repr"] = r.rmse_repr;
  return d;
}

}  // namespace

PYBIND11_MODULE(_statsep, m) {
  m.doc() = "Statistical component separation with wavelet phase harmonics";

  // Leaked on purpose: the type must outlive interpreter teardown.
  static PyObject* exc = py::exception<Error>(m, "StatsepError", PyExc_ValueError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(exc, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<FilterBank, std::shared_ptr<FilterBank>>(m, "FilterBank")
      .def(py::init([](std::size_t h, std::size_t w, std::optional<std::size_t> J, std::size_t L) {
             return std::make_shared<FilterBank>(build_bank(h, w, J.value_or(default_scale_count(h, w)), L));
           }),
           py::arg("height"), py::arg("width"), py::arg("J") = py::none(), py::arg("L") = 4)
      .def_readonly("J", &FilterBank::J)
      .def_readonly("L", &FilterBank::L)
      .def_property_readonly("shape", [](const FilterBank& b) { return py::make_tuple(b.shape.height, b.shape.width); })
      .def_readonly("center_freqs", &FilterBank::center_freqs)
      .def("filter", [](const FilterBank& b, std::size_t j, std::size_t l) {
        if (j >= b.J || l >= b.L) throw Error(ErrorKind::InvalidArgument, "filter index out of range");
        const auto& f = b.filters[b.index(j, l)];
        py::array_t<std::complex<double>> out(dims({b.shape.height, b.shape.width}));
        std::copy(f.values().begin(), f.values().end(), out.mutable_data());
        return out;
      }, py::arg("j"), py::arg("l"), "Fourier multiplier of filter (j, l)")
      .def("__len__", &FilterBank::size);

  m.def("wph", [](const RealArray& x, const FilterBank& bank, std::optional<std::string> classes) {
    return to_array(wph_compute(to_field(x), bank, mask_from(classes)).flatten());
  }, py::arg("x"), py::arg("bank"), py::arg("classes") = py::none(),
        "Flat WPH vector in S11, S00, S01, C01 order");

  m.def("wph_layout", [](std::size_t J, std::size_t L, std::optional<std::string> classes) {
    const WphLayout layout(J, L, mask_from(classes));
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
    for (const auto& e : layout.entries()) out.emplace_back(to_string(e.cls), e.first, e.second);
    return out;
  }, py::arg("J"), py::arg("L") = 4, py::arg("classes") = py::none(),
        "(class, first filter, second filter) per coefficient");

  m.def("sample_noise", [](std::pair<std::size_t, std::size_t> shape, const std::string& kind, double sigma,
                           std::uint64_t seed, double reference_std, double crosses_density) {
    NoiseModel n;
    n.kind = parse_noise_kind(kind);
    n.sigma = sigma;
    n.reference_std = reference_std;
    n.shape = {shape.first, shape.second};
    n.crosses_density = crosses_density;
    return to_array(sample(n, seed));
  }, py::arg("shape"), py::arg("kind") = "white", py::arg("sigma") = 1.0, py::arg("seed") = 0,
        py::arg("reference_std") = 1.0, py::arg("crosses_density") = 2e-3);

  m.def("texture", [](std::pair<std::size_t, std::size_t> shape, const std::string& kind, double slope,
                      std::uint64_t seed, double contrast) {
    TextureSpec s;
    s.kind = parse_texture_kind(kind);
    s.shape = {shape.first, shape.second};
    s.spectral_slope = slope;
    s.seed = seed;
    s.lognormal_contrast = contrast;
    return to_array(generate(s));
  }, py::arg("shape") = std::make_pair(64, 64), py::arg("kind") = "lognormal", py::arg("slope") = -1.5,
        py::arg("seed") = 0, py::arg("contrast") = 1.0);

  m.def("sqrt_threshold", [](double y, double sigma) { return analytic::sqrt_threshold(y, sigma).values; },
        py::arg("y"), py::arg("sigma"), "Global minimizers for phi(x) = x^2");

  m.def("spectral_minimum", [](const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double sigma) {
    const auto s = analytic::spectral_minimum_spec(A, y, sigma);
    py::dict d;
    d["spectrum"] = s.spectrum;
    d["lambda_set"] = s.lambda_set;
    d["chosen_lambda"] = s.chosen_lambda;
    d["noise_energy"] = s.noise_energy;
    d["target_norm"] = s.target_norm;
    d["eigenspace"] = s.eigenspace;
    d["representative"] = s.representative;
    return d;
  }, py::arg("A"), py::arg("y"), py::arg("sigma"), "Minimizer set for phi(x) = ||A x||^2");

  m.def("psnr", [](const RealArray& c, const RealArray& r) { return psnr(to_field(c), to_field(r)); },
        py::arg("candidate"), py::arg("reference"));

  m.def("mc_loss", [](const RealArray& x, const RealArray& y, double sigma, std::size_t Q, std::uint64_t seed,
                      double alpha, std::optional<std::size_t> J, std::size_t L, std::optional<std::string> classes,
                      bool normalize, double reference_std) {
    const Field2D xf = to_field(x), yf = to_field(y);
    auto bank = std::make_shared<const FilterBank>(
        build_bank(xf.height(), xf.width(), J.value_or(default_scale_count(xf.height(), xf.width())), L));
    std::optional<NormalizationRef> ref;
    if (normalize) ref = NormalizationRef::from_observation(yf, *bank);
    const WphRepresentation rep(bank, mask_from(classes), ref);
    NoiseModel n;
    n.sigma = sigma;
    n.reference_std = reference_std;
    n.shape = xf.shape();
    const auto e = mc_loss(xf, rep.eval(yf), rep, n, alpha, Q, seed);
    return py::make_tuple(e.value, to_array(e.gradient), e.standard_error());
  }, py::arg("x"), py::arg("y"), py::arg("sigma"), py::arg("Q") = 100, py::arg("seed") = 0, py::arg("alpha") = 1.0,
        py::arg("J") = py::none(), py::arg("L") = 4, py::arg("classes") = py::none(), py::arg("normalize") = true,
        py::arg("reference_std") = 1.0,
        "Monte Carlo WPH loss against phi(y): (value, gradient, standard error)");

  m.def("separate", [](const RealArray& y, double sigma, const std::string& algorithm, double reference_std,
                       const std::string& noise, const std::string& representation, std::optional<std::size_t> J,
                       std::size_t L, std::optional<std::string> classes, bool normalize, std::optional<std::size_t> Q,
                       std::optional<std::size_t> T, std::optional<std::size_t> P, std::uint64_t seed,
                       std::size_t threads, std::optional<RealArray> init) {
    RunConfig cfg;
    cfg.algorithm = parse_algorithm(algorithm);
    cfg.noise_kind = parse_noise_kind(noise);
    cfg.sigma = sigma;
    cfg.representation.kind = parse_representation_kind(representation);
    cfg.representation.J = J;
    cfg.representation.L = L;
    if (classes) cfg.representation.mask = ClassMask::parse(*classes);
    cfg.representation.normalize = normalize;
    cfg.Q = Q, cfg.T = T, cfg.P = P;
    cfg.threads = threads;
    cfg.validate();
    const Field2D yf = to_field(y);
    NoiseModel n;
    n.kind = cfg.noise_kind;
    n.sigma = sigma;
    n.reference_std = reference_std;
    n.shape = yf.shape();
    n.crosses_density = cfg.crosses_density;
    if (cfg.algorithm == Algorithm::AnalyticOracle) {
      return py::make_tuple(to_array(analytic::sqrt_threshold_field(yf, sigma * reference_std)), py::dict());
    }
    SeparationConfig sc = cfg.separation_config(sigma, seed);
    if (init) sc.init = to_field(*init);
    SeparationResult r;
    {
      py::gil_scoped_release release;
      const auto rep = make_representation(cfg, yf, make_bank(cfg, yf.shape()));
      switch (cfg.algorithm) {
        case Algorithm::Vanilla: r = vanilla_separate(yf, n, *rep, sc); break;
        case Algorithm::Delouis: r = delouis_separate(yf, n, *rep, sc); break;
        default: r = diffusive_separate(yf, n, *rep, sc); break;
      }
    }
    return py::make_tuple(to_array(r.estimate), trace_dict(r.trace));
  }, py::arg("y"), py::arg("sigma"), py::arg("algorithm") = "vanilla", py::arg("reference_std") = 1.0,
        py::arg("noise") = "white", py::arg("representation") = "wph", py::arg("J") = py::none(), py::arg("L") = 4,
        py::arg("classes") = py::none(), py::arg("normalize") = true, py::arg("Q") = py::none(),
        py::arg("T") = py::none(), py::arg("P") = py::none(), py::arg("seed") = 0, py::arg("threads") = 1,
        py::arg("init") = py::none(),
        "Estimate the clean signal of observation y; returns (estimate, trace)");

  m.def("evaluate", [](const RealArray& estimate, const RealArray& observation, const RealArray& clean,
                       const FilterBank& bank) {
    return report_dict(evaluate_estimate(to_field(estimate), to_field(observation), to_field(clean), bank));
  }, py::arg("estimate"), py::arg("observation"), py::arg("clean"), py::arg("bank"));

  m.def("run_config", [](const std::string& path, std::optional<double> sigma, std::size_t realization) {
    const RunConfig cfg = load_config(path);
    cfg.validate();
    const Field2D clean = load_clean(cfg);
    RunOutputs out;
    {
      py::gil_scoped_release release;
      out = run_cell(cfg, clean, sigma.value_or(cfg.sigma), 0, realization);
    }
    py::dict d;
    d["clean"] = to_array(clean);
    d["observation"] = to_array(out.observation);
    d["estimate"] = to_array(out.estimate);
    d["trace"] = trace_dict(out.trace);
    d["report"] = report_dict(out.report);
    return d;
  }, py::arg("path"), py::arg("sigma") = py::none(), py::arg("realization") = 0,
        "One denoising run described by an INI config");
}
