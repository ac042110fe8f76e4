#include "surrovv/bounds.hpp"
#include "surrovv/conformal.hpp"
#include "surrovv/errors.hpp"
#include "surrovv/harness.hpp"
#include "surrovv/novelty.hpp"
#include "surrovv/smib.hpp"
#include "surrovv/surrogate.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace surrovv;

namespace {

Trajectory as_trajectory(const Matrix& states, double t0, double dt) {
  Trajectory t;
  t.grid.t0 = t0;
  t.grid.dt = dt;
  t.grid.n_steps = static_cast<int>(states.rows()) - 1;
  t.states = states;
  return t;
}

py::dict run_dict(const PerturbationRunResult& r) {
  py::dict d;
  Vector t(r.reference.grid.n_points());
  for (int k = 0; k < t.size(); ++k) t[k] = r.reference.grid.time(k);
  d["t"] = t;
  d["reference"] = r.reference.states;
  d["perturbed"] = r.perturbed.states;
  d["e_z"] = r.e_z;
  d["e_x"] = r.e_x;
  d["e_y"] = r.e_y;
  d["e_sim"] = r.e_sim;
  d["max_e_z"] = r.max_e_z;
  d["max_e_sim"] = r.max_e_sim;
  d["amplitude"] = r.amplitude;
  return d;
}

}  // namespace

PYBIND11_MODULE(_surrovv, m) {
  m.doc() = "surrovv core bindings";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> base_exc(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base_exc, e.what());
    }
  });
  py::register_exception<ConfigError>(m, "ConfigError", base_exc.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base_exc.ptr());

  // bounds
  py::class_<BoundConstants>(m, "BoundConstants")
      .def(py::init<>())
      .def(py::init([](double K_yz, double K_yx, double L_y, double mu_cl, double T) {
             return BoundConstants{K_yz, K_yx, L_y, mu_cl, T};
           }),
           py::arg("K_yz"), py::arg("K_yx"), py::arg("L_y"), py::arg("mu_cl"), py::arg("T"))
      .def_readwrite("K_yz", &BoundConstants::K_yz)
      .def_readwrite("K_yx", &BoundConstants::K_yx)
      .def_readwrite("L_y", &BoundConstants::L_y)
      .def_readwrite("mu_cl", &BoundConstants::mu_cl)
      .def_readwrite("T", &BoundConstants::T)
      .def_property_readonly("alpha", &BoundConstants::alpha);
  m.def("phi", &phi, py::arg("T"), py::arg("alpha"));
  m.def(
      "theorem_bounds",
      [](const BoundConstants& c, double eps) {
        const TheoremBounds b = theorem_bounds(c, eps);
        return py::dict(py::arg("ex") = b.ex, py::arg("ey") = b.ey, py::arg("total") = b.total);
      },
      py::arg("constants"), py::arg("eps"));
  m.def("eps_max", &eps_max, py::arg("constants"), py::arg("Delta"));

  // smib
  py::class_<MachineParams>(m, "MachineParams")
      .def(py::init<>())
      .def_readwrite("H", &MachineParams::H)
      .def_readwrite("D", &MachineParams::D)
      .def_readwrite("E_prime", &MachineParams::E_prime)
      .def_readwrite("X_d_prime", &MachineParams::X_d_prime)
      .def_readwrite("P_m0", &MachineParams::P_m0)
      .def_readwrite("dP_m", &MachineParams::dP_m)
      .def_readwrite("t_step", &MachineParams::t_step);
  m.def("benchmark_machine", &smib_benchmark_machine);

  py::class_<SmibConfig>(m, "SmibConfig")
      .def(py::init([](double X_line, double T, double dt, const std::string& injection) {
             SmibConfig c;
             c.machine = smib_benchmark_machine();
             c.X_line = X_line;
             c.grid = TimeGrid::over(T, dt);
             if (injection == "pre-solve") c.injection = InjectionPoint::kPreSolve;
             else if (injection == "post-solve") c.injection = InjectionPoint::kPostSolve;
             else throw ConfigError("injection must be pre-solve or post-solve");
             c.validate();
             return c;
           }),
           py::arg("X_line"), py::arg("T") = 8.0, py::arg("dt") = 0.01,
           py::arg("injection") = "pre-solve")
      .def_readwrite("machine", &SmibConfig::machine)
      .def_readwrite("V_inf", &SmibConfig::V_inf)
      .def_readwrite("X_line", &SmibConfig::X_line);

  py::class_<Disturbance>(m, "Disturbance")
      .def(py::init([](double epsilon, double t_on, double t_off, double w, double phi_) {
             Disturbance d;
             d.epsilon = epsilon;
             d.t_on = t_on;
             d.t_off = t_off;
             d.w = w;
             d.phi = phi_;
             d.validate();
             return d;
           }),
           py::arg("epsilon") = 0.02, py::arg("t_on") = 1.2, py::arg("t_off") = 3.0,
           py::arg("w") = 0.03, py::arg("phi") = 0.7)
      .def_readwrite("epsilon", &Disturbance::epsilon)
      .def_readwrite("amplitude", &Disturbance::amplitude);

  m.def("calibrate_amplitude", &calibrate_amplitude, py::arg("config"),
        py::arg("disturbance"), py::arg("target_eps"));
  m.def(
      "perturbation_run",
      [](const SmibConfig& cfg, Disturbance d, bool calibrate) {
        if (calibrate) d.amplitude = calibrate_amplitude(cfg, d, d.epsilon);
        return run_dict(perturbation_run(cfg, d));
      },
      py::arg("config"), py::arg("disturbance"), py::arg("calibrate") = true);
  m.def(
      "xline_sweep",
      [](const SmibConfig& cfg, const Disturbance& d, const std::vector<double>& xs) {
        py::list out;
        for (const auto& r : xline_sweep(cfg, d, d.epsilon, xs)) {
          out.append(py::dict(py::arg("x_line") = r.x_line, py::arg("amplitude") = r.amplitude,
                              py::arg("max_e_z") = r.max_e_z,
                              py::arg("max_e_sim") = r.max_e_sim,
                              py::arg("e_x_final") = r.e_x_final,
                              py::arg("e_y_final") = r.e_y_final));
        }
        return out;
      },
      py::arg("config"), py::arg("disturbance"), py::arg("x_line"));

  // surrogate
  py::class_<MlpSurrogate>(m, "MlpSurrogate")
      .def(py::init<int, int, std::vector<int>>(), py::arg("n_state"), py::arg("n_u"),
           py::arg("hidden") = std::vector<int>{64, 64, 64})
      .def("initialize", &MlpSurrogate::initialize, py::arg("seed"))
      .def_property_readonly("n_state", &MlpSurrogate::n_state)
      .def_property_readonly("n_u", &MlpSurrogate::n_u)
      .def_property_readonly("layer_sizes", &MlpSurrogate::layer_sizes)
      .def_property("t_max", &MlpSurrogate::t_max, &MlpSurrogate::set_t_max)
      .def("parameter_count", &MlpSurrogate::parameter_count)
      .def("flat_parameters", &MlpSurrogate::flat_parameters)
      .def("set_flat_parameters", &MlpSurrogate::set_flat_parameters)
      .def("save", &MlpSurrogate::save, py::arg("path"))
      .def_static("load", &MlpSurrogate::load, py::arg("path"));
  m.def("forward", &forward, py::arg("net"), py::arg("x0"), py::arg("u"), py::arg("tau"));
  m.def("grad_inputs", &grad_inputs, py::arg("net"), py::arg("x0"), py::arg("u"),
        py::arg("tau"));
  m.def(
      "surrogate_trajectory",
      [](const MlpSurrogate& net, const Vector& x0, const Vector& u, double T, double dt) {
        return surrogate_trajectory(net, x0, u, TimeGrid::over(T, dt)).states;
      },
      py::arg("net"), py::arg("x0"), py::arg("u"), py::arg("T"), py::arg("dt"));

  // novelty
  m.def(
      "traj_distance",
      [](const Matrix& a, const Matrix& b, double dt) {
        return traj_distance(as_trajectory(a, 0.0, dt), as_trajectory(b, 0.0, dt));
      },
      py::arg("a"), py::arg("b"), py::arg("dt") = 0.01);
  m.def(
      "novelty_score",
      [](const Matrix& candidate, const std::vector<Matrix>& archive, double beta, double dt) {
        TrajectoryArchive arch;
        arch.beta = beta;
        for (const auto& t : archive) arch.add(as_trajectory(t, 0.0, dt));
        return novelty_score(as_trajectory(candidate, 0.0, dt), arch);
      },
      py::arg("candidate"), py::arg("archive"), py::arg("beta") = 1.0, py::arg("dt") = 0.01);

  // conformal
  py::class_<CalibrationSample>(m, "CalibrationSample")
      .def(py::init([](const Vector& features, double target, double prediction, double sigma) {
             return CalibrationSample{features, target, prediction, sigma};
           }),
           py::arg("features"), py::arg("target"), py::arg("prediction"),
           py::arg("sigma") = 1.0)
      .def_readwrite("features", &CalibrationSample::features)
      .def_readwrite("target", &CalibrationSample::target)
      .def_readwrite("prediction", &CalibrationSample::prediction)
      .def_readwrite("sigma", &CalibrationSample::sigma);
  m.def(
      "nonconformity",
      [](double target, double prediction, double sigma) {
        return nonconformity(CalibrationSample{Vector(), target, prediction, sigma});
      },
      py::arg("target"), py::arg("prediction"), py::arg("sigma") = 1.0);
  m.def("split_quantile", &split_quantile, py::arg("scores"), py::arg("alpha"));
  m.def("ucb_quantile", &ucb_quantile, py::arg("scores"), py::arg("alpha"),
        py::arg("delta"));
  m.def(
      "interval",
      [](double q, double prediction, double sigma) {
        const Interval iv = interval(q, prediction, sigma);
        return py::make_tuple(iv.lo, iv.hi, iv.unbounded);
      },
      py::arg("q"), py::arg("prediction"), py::arg("sigma"));
  m.def(
      "coverage_experiment",
      [](const std::vector<CalibrationSample>& data, const std::vector<double>& rhos,
         double alpha, double delta, int n_repeats, std::uint64_t seed, int max_test) {
        CoverageOptions o;
        o.alpha = alpha;
        o.delta = delta;
        o.n_repeats = n_repeats;
        o.seed = seed;
        o.max_test = max_test;
        py::list out;
        for (const auto& r : coverage_experiment(data, rhos, o)) {
          out.append(py::dict(py::arg("rho") = r.rho, py::arg("method") = to_string(r.method),
                              py::arg("mean_coverage") = r.mean_coverage,
                              py::arg("mean_halfwidth") = r.mean_halfwidth,
                              py::arg("n_cal") = r.n_cal));
        }
        return out;
      },
      py::arg("data"), py::arg("rhos"), py::arg("alpha") = 0.05, py::arg("delta") = 0.05,
      py::arg("n_repeats") = 1000, py::arg("seed") = 0, py::arg("max_test") = 0);

  // harness
  m.def(
      "run_config",
      [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out, std::optional<std::string> experiment) {
        harness::Overrides o;
        o.seed = seed;
        o.output_dir = std::move(out);
        o.experiment = std::move(experiment);
        std::ostringstream diag;
        int rc = 0;
        {
          py::gil_scoped_release release;
          rc = harness::run(config, o, diag);
        }
        return py::make_tuple(rc, diag.str());
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      py::arg("experiment") = py::none());
}
