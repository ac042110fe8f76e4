#include "surrovv/smib.hpp"

#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"
#include "surrovv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace surrovv {

namespace {
constexpr Complex kJ{0.0, 1.0};
}

void SmibConfig::validate() const {
  machine.validate();
  if (!(X_line >= 0.0) || !std::isfinite(X_line)) {
    throw ConfigError("smib.X_line must be >= 0");
  }
  if (!(std::abs(V_inf) > 0.0) || !std::isfinite(std::abs(V_inf))) {
    throw ConfigError("|V_inf| must be > 0");
  }
  grid.validate();
}

MachineParams smib_benchmark_machine() {
  MachineParams m;
  m.H = 3.5;
  m.D = 0.0;
  m.E_prime = 1.1;
  m.X_d_prime = 0.3;
  m.P_m0 = 0.7;
  m.dP_m = 0.08;
  m.t_step = 1.0;
  return m;
}

NetworkSolution network_solve(double delta, const SmibConfig& cfg,
                              Complex disturbance) {
  const double x_eq = cfg.X_eq();
  if (!(x_eq > 0.0)) {
    throw SingularNetwork("X_eq = X_d' + X_line must be > 0");
  }
  const Complex E = std::polar(cfg.machine.E_prime, delta);
  Complex I = (E - cfg.V_inf) / (kJ * x_eq);
  if (cfg.injection == InjectionPoint::kPreSolve) {
    I += disturbance * (cfg.machine.X_d_prime / x_eq);
  } else {
    I += disturbance;
  }
  NetworkSolution s;
  s.I = I;
  s.V = cfg.V_inf + kJ * cfg.X_line * I;
  s.P_e = (s.V * std::conj(s.I)).real();
  return s;
}

NetworkSolution network_solve(double delta, const SmibConfig& cfg) {
  return network_solve(delta, cfg, Complex{0.0, 0.0});
}

Equilibrium find_equilibrium(const SmibConfig& cfg) {
  const double arg = cfg.machine.P_m0 * cfg.X_eq() /
                     (cfg.machine.E_prime * std::abs(cfg.V_inf));
  if (!(arg > -1.0 && arg < 1.0)) {
    throw InfeasibleDispatch(
        "no steady state: P_m0 X_eq / (E' |V_inf|) = " + std::to_string(arg) +
        " lies outside (-1, 1)");
  }
  return {std::arg(cfg.V_inf) + std::asin(arg), 0.0};
}

void Disturbance::validate() const {
  if (!(t_on < t_off)) throw ConfigError("disturbance needs t_on < t_off");
  if (!(w > 0.0)) throw ConfigError("disturbance window width w must be > 0");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ConfigError("disturbance amplitude must be finite and >= 0");
  }
}

double window(double t, const Disturbance& d) {
  return 0.5 * (std::tanh((t - d.t_on) / d.w) - std::tanh((t - d.t_off) / d.w));
}

Complex Disturbance::at(double t) const {
  return amplitude * window(t, *this) * std::polar(1.0, phi);
}

double nominal_amplitude(const SmibConfig& cfg, double eps) {
  return eps * cfg.X_eq() / cfg.machine.X_d_prime;
}

namespace {

VectorField make_field(const SmibConfig& cfg, std::function<Complex(double)> dist) {
  ElectricalPower pe;
  pe.value = [cfg, dist](const Vector& x, double t) {
    return network_solve(x[0], cfg, dist(t)).P_e;
  };
  // P_e = Re(V_inf conj(I)) because the line is lossless, and
  // dI/d(delta) = E' e^{j delta} / X_eq under either injection point.
  pe.gradient = [cfg](const Vector& x, double) {
    const Complex dI = std::polar(cfg.machine.E_prime, x[0]) / cfg.X_eq();
    Vector g(2);
    g[0] = (cfg.V_inf * std::conj(dI)).real();
    g[1] = 0.0;
    return g;
  };
  return sm2_field(cfg.machine, pe);
}

}  // namespace

VectorField smib_field(const SmibConfig& cfg) {
  cfg.validate();
  return make_field(cfg, [](double) { return Complex{0.0, 0.0}; });
}

VectorField smib_field(const SmibConfig& cfg, const Disturbance& d) {
  cfg.validate();
  d.validate();
  return make_field(cfg, [d](double t) { return d.at(t); });
}

namespace {

struct Prepared {
  Vector x0;
  Vector p;
  Trajectory reference;
};

Prepared prepare(const SmibConfig& cfg) {
  cfg.validate();
  const Equilibrium eq = find_equilibrium(cfg);
  Prepared pr;
  pr.x0 = Vector(2);
  pr.x0 << eq.delta0, eq.omega0;
  pr.p = Vector::Constant(1, cfg.machine.P_m0);
  pr.reference = integrate_rk4(smib_field(cfg), pr.x0, pr.p, cfg.grid);
  return pr;
}

PerturbationRunResult run_against(const SmibConfig& cfg, const Disturbance& d,
                                  const Prepared& pr) {
  PerturbationRunResult r;
  r.amplitude = d.amplitude;
  r.reference = pr.reference;
  r.perturbed = integrate_rk4(smib_field(cfg, d), pr.x0, pr.p, cfg.grid);
  const int n = cfg.grid.n_points();
  r.e_z.resize(n);
  r.e_x.resize(n);
  r.e_y.resize(n);
  r.e_sim.resize(n);
  for (int k = 0; k < n; ++k) {
    const double t = cfg.grid.time(k);
    const NetworkSolution ref = network_solve(r.reference.states(k, 0), cfg);
    const NetworkSolution hat =
        network_solve(r.perturbed.states(k, 0), cfg, d.at(t));
    r.e_z[k] = std::abs(hat.I - ref.I);
    r.e_y[k] = std::abs(hat.V - ref.V);
    r.e_x[k] = (r.perturbed.states.row(k) - r.reference.states.row(k)).norm();
    r.e_sim[k] = r.e_x[k] + r.e_y[k];
  }
  r.max_e_z = r.e_z.maxCoeff();
  r.max_e_sim = r.e_sim.maxCoeff();
  return r;
}

}  // namespace

PerturbationRunResult perturbation_run(const SmibConfig& cfg,
                                       const Disturbance& d) {
  d.validate();
  return run_against(cfg, d, prepare(cfg));
}

double calibrate_amplitude(const SmibConfig& cfg, const Disturbance& d,
                           double target_eps) {
  if (!(target_eps > 0.0) || !std::isfinite(target_eps)) {
    throw ContractViolation("calibrate_amplitude needs target_eps > 0");
  }
  const Prepared pr = prepare(cfg);
  std::vector<std::pair<double, double>> probes;
  auto measure = [&](double a) {
    Disturbance trial = d;
    trial.amplitude = a;
    const double m = run_against(cfg, trial, pr).max_e_z;
    probes.emplace_back(a, m);
    return m;
  };
  auto fail = [&](const std::string& why) {
    double a_max = 0.0;
    for (const auto& pr_ : probes) a_max = std::max(a_max, pr_.first);
    for (int i = 1; i <= 10; ++i) measure(a_max * i / 10.0);
    throw CalibrationFailure(why, probes);
  };
  const double tol = 1e-4 * target_eps;

  double hi = nominal_amplitude(cfg, target_eps);
  double m_hi = measure(hi);
  if (std::abs(m_hi - target_eps) <= tol) return hi;
  double lo = 0.0;
  double m_lo = 0.0;
  int grow = 0;
  while (m_hi < target_eps) {
    if (++grow > 30) fail("could not bracket the target interface error");
    lo = hi;
    m_lo = m_hi;
    hi *= 2.0;
    m_hi = measure(hi);
    if (m_hi < m_lo) fail("max e_z decreased while growing the amplitude");
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double m = measure(mid);
    if (m < m_lo || m > m_hi) {
      fail("max e_z is not monotone in the amplitude inside the bracket");
    }
    if (std::abs(m - target_eps) <= tol) return mid;
    if (m < target_eps) {
      lo = mid;
      m_lo = m;
    } else {
      hi = mid;
      m_hi = m;
    }
  }
  fail("bisection did not reach 1e-4 relative accuracy in 40 steps");
  return 0.0;  // unreachable
}

std::vector<SweepRow> xline_sweep(const SmibConfig& base, const Disturbance& d,
                                  double target_eps,
                                  const std::vector<double>& xline_values) {
  if (xline_values.empty()) throw ConfigError("xline sweep needs at least one value");
  for (std::size_t i = 0; i < xline_values.size(); ++i) {
    if (!(xline_values[i] >= 0.0)) throw ConfigError("X_line values must be >= 0");
    if (i > 0 && xline_values[i] < xline_values[i - 1]) {
      throw ConfigError("X_line values must be sorted ascending");
    }
  }
  std::vector<SweepRow> rows(xline_values.size());
  parallel_for(xline_values.size(), [&](std::size_t i) {
    SmibConfig cfg = base;
    cfg.X_line = xline_values[i];
    Disturbance di = d;
    di.amplitude = calibrate_amplitude(cfg, d, target_eps);
    const PerturbationRunResult r = perturbation_run(cfg, di);
    SweepRow row;
    row.x_line = cfg.X_line;
    row.amplitude = di.amplitude;
    row.max_e_z = r.max_e_z;
    row.max_e_sim = r.max_e_sim;
    row.max_e_x = r.e_x.maxCoeff();
    row.e_x_final = r.e_x[r.e_x.size() - 1];
    row.e_y_final = r.e_y[r.e_y.size() - 1];
    rows[i] = row;
  });
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows) {
  io::CsvTable t({"x_line", "max_e_z", "max_e_sim"});
  for (const auto& r : rows) {
    t.add_row({io::format_double(r.x_line), io::format_double(r.max_e_z),
               io::format_double(r.max_e_sim)});
  }
  t.write(path);
}

void write_perturbation_csv(const std::filesystem::path& path,
                            const PerturbationRunResult& run) {
  io::CsvTable t({"t", "e_z", "e_x", "e_y", "e_sim"});
  const TimeGrid& g = run.reference.grid;
  for (int k = 0; k < g.n_points(); ++k) {
    t.add_row({io::format_double(g.time(k)), io::format_double(run.e_z[k]),
               io::format_double(run.e_x[k]), io::format_double(run.e_y[k]),
               io::format_double(run.e_sim[k])});
  }
  t.write(path);
}

CoupledSystem smib_coupled_system(const SmibConfig& cfg, SmibCouplingForm form) {
  cfg.validate();
  CoupledSystem sys;
  sys.n_x = 2;
  sys.n_y = 2;
  sys.n_z = 2;
  sys.n_u = 1;
  const MachineParams m = cfg.machine;
  const Complex V_inf = cfg.V_inf;
  const double X_line = cfg.X_line;
  auto swing = [m](const Vector& x, double p_e, const Vector& u, double t) {
    Vector dx(2);
    dx[0] = x[1];
    dx[1] = (mechanical_power(m, u[0], t) - p_e - m.D * x[1]) / (2.0 * m.H);
    return dx;
  };
  if (form == SmibCouplingForm::kNetworkSide) {
    sys.f = [swing, V_inf, X_line](const Vector& x, const Vector& y,
                                   const Vector& u, double t) {
      if (!(X_line > 0.0)) {
        throw SingularNetwork("network-side coupling needs X_line > 0");
      }
      const Complex V{y[0], y[1]};
      return swing(x, (V * std::conj(V_inf)).imag() / X_line, u, t);
    };
  } else {
    sys.f = [swing, m](const Vector& x, const Vector& y, const Vector& u,
                       double t) {
      const Complex V{y[0], y[1]};
      const Complex I =
          (std::polar(m.E_prime, x[0]) - V) / (kJ * m.X_d_prime);
      return swing(x, (V * std::conj(I)).real(), u, t);
    };
  }
  sys.algebraic = [V_inf, X_line](const Vector&, const Vector& z,
                                  const Vector&) {
    const Complex V = V_inf + kJ * X_line * Complex{z[0], z[1]};
    Vector y(2);
    y << V.real(), V.imag();
    return y;
  };
  return sys;
}

}  // namespace surrovv
