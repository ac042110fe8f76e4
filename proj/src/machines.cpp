#include "surrovv/machines.hpp"

#include "surrovv/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace surrovv {

void MachineParams::validate() const {
  if (!(H > 0.0)) throw ConfigError("machine.H must be > 0");
  if (!(X_d_prime > 0.0)) throw ConfigError("machine.X_d_prime must be > 0");
  if (!(E_prime > 0.0)) throw ConfigError("machine.E_prime must be > 0");
  if (!std::isfinite(D) || !std::isfinite(P_m0) || !std::isfinite(dP_m) ||
      !std::isfinite(t_step)) {
    throw ConfigError("machine parameters must be finite");
  }
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0.0)) {
      throw ConfigError(std::string("machine.") + name + " must be > 0");
    }
  };
  positive(X_q_prime, "X_q_prime");
  positive(X_d, "X_d");
  positive(X_q, "X_q");
  positive(T_d0_prime, "T_d0_prime");
  positive(T_q0_prime, "T_q0_prime");
}

bool MachineParams::has_sm4() const {
  return X_q_prime && X_d && X_q && T_d0_prime && T_q0_prime && E_fd;
}

void MachineParams::require_sm4() const {
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) {
      throw ConfigError(std::string("SM4 model needs machine.") + name +
                        " (no default: values come from the external machine "
                        "data reference)");
    }
  };
  need(X_q_prime, "X_q_prime");
  need(X_d, "X_d");
  need(X_q, "X_q");
  need(T_d0_prime, "T_d0_prime");
  need(T_q0_prime, "T_q0_prime");
  need(E_fd, "E_fd");
}

double mechanical_power(const MachineParams& m, double P_m0, double t) {
  return t >= m.t_step ? P_m0 + m.dP_m : P_m0;
}

VectorField sm2_field(const MachineParams& m, ElectricalPower pe) {
  m.validate();
  if (!pe.value) throw ContractViolation("sm2_field needs an electrical power map");
  VectorField f;
  f.n_state = 2;
  f.n_param = 1;
  const double two_h = 2.0 * m.H;
  f.eval = [m, pe, two_h](const Vector& x, const Vector& p, double t) {
    Vector dx(2);
    dx[0] = x[1];
    dx[1] = (mechanical_power(m, p[0], t) - pe.value(x, t) - m.D * x[1]) / two_h;
    return dx;
  };
  if (pe.gradient) {
    f.jac_state = [m, pe, two_h](const Vector& x, const Vector&, double t) {
      const Vector g = pe.gradient(x, t);
      Matrix J(2, 2);
      J << 0.0, 1.0, -g[0] / two_h, (-g[1] - m.D) / two_h;
      return J;
    };
  }
  f.jac_param = [two_h](const Vector&, const Vector&, double) {
    Matrix J(2, 1);
    J << 0.0, 1.0 / two_h;
    return J;
  };
  return f;
}

VectorField sm4_field(const MachineParams& m, NetworkCoupling coupling) {
  m.validate();
  m.require_sm4();
  if (!coupling) throw ContractViolation("sm4_field needs a network coupling");
  VectorField f;
  f.n_state = 4;
  f.n_param = 1;
  f.eval = [m, coupling](const Vector& x, const Vector& p, double t) {
    const DqCurrents c = coupling(x, t);
    const double Eq = x[2];
    const double Ed = x[3];
    const double pe =
        Ed * c.I_d + Eq * c.I_q + (*m.X_q_prime - m.X_d_prime) * c.I_d * c.I_q;
    Vector dx(4);
    dx[0] = x[1];
    dx[1] = (mechanical_power(m, p[0], t) - pe - m.D * x[1]) / (2.0 * m.H);
    dx[2] = (-Eq - (*m.X_d - m.X_d_prime) * c.I_d + *m.E_fd) / *m.T_d0_prime;
    dx[3] = (-Ed + (*m.X_q - *m.X_q_prime) * c.I_q) / *m.T_q0_prime;
    return dx;
  };
  f.jac_param = [m](const Vector&, const Vector&, double) {
    Matrix J = Matrix::Zero(4, 1);
    J(1, 0) = 1.0 / (2.0 * m.H);
    return J;
  };
  return f;
}

NetworkCoupling sm4_infinite_bus(const MachineParams& m, Complex V_inf,
                                 double X_line) {
  m.require_sm4();
  if (!(X_line >= 0.0)) throw ConfigError("X_line must be >= 0");
  const double Vm = std::abs(V_inf);
  const double theta = std::arg(V_inf);
  const double xd = m.X_d_prime + X_line;
  const double xq = *m.X_q_prime + X_line;
  return [Vm, theta, xd, xq](const Vector& x, double) {
    const double a = x[0] - theta;
    DqCurrents c;
    c.I_d = (x[2] - Vm * std::cos(a)) / xd;
    c.I_q = (Vm * std::sin(a) - x[3]) / xq;
    return c;
  };
}

Vector sm4_equilibrium(const MachineParams& m, Complex V_inf, double X_line,
                       double P_m) {
  m.validate();
  m.require_sm4();
  const double Vm = std::abs(V_inf);
  const double theta = std::arg(V_inf);
  const double Xe = X_line;
  const double Xdp = m.X_d_prime;
  const double Xqp = *m.X_q_prime;
  auto state_at = [&](double a) {
    Vector x(4);
    x[0] = theta + a;
    x[1] = 0.0;
    x[2] = (*m.E_fd * (Xdp + Xe) + (*m.X_d - Xdp) * Vm * std::cos(a)) /
           (*m.X_d + Xe);
    x[3] = (*m.X_q - Xqp) * Vm * std::sin(a) / (*m.X_q + Xe);
    return x;
  };
  const NetworkCoupling net = sm4_infinite_bus(m, V_inf, X_line);
  auto power_at = [&](double a) {
    const Vector x = state_at(a);
    const DqCurrents c = net(x, 0.0);
    return x[3] * c.I_d + x[2] * c.I_q + (Xqp - Xdp) * c.I_d * c.I_q;
  };
  // Stable branch: between zero angle and the peak of the power curve on the
  // side matching the sign of P_m.
  const double sign = P_m >= 0.0 ? 1.0 : -1.0;
  const int n_scan = 2000;
  double peak_a = 0.0;
  double peak_p = 0.0;
  for (int i = 1; i <= n_scan; ++i) {
    const double a = sign * std::numbers::pi * i / n_scan;
    const double p = sign * power_at(a);
    if (p > peak_p) {
      peak_p = p;
      peak_a = a;
    }
  }
  if (sign * P_m > peak_p) {
    throw InfeasibleDispatch("SM4 cannot deliver P_m = " + std::to_string(P_m) +
                             " (peak " + std::to_string(sign * peak_p) + ")");
  }
  double lo = 0.0;
  double hi = peak_a;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sign * power_at(mid) < sign * P_m) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return state_at(0.5 * (lo + hi));
}

DqCurrents park_dq(Complex I, double delta, ParkConvention convention) {
  const double s = convention == ParkConvention::kRotateByMinusDelta ? -1.0 : 1.0;
  const Complex r = I * std::polar(1.0, s * delta);
  return {r.real(), r.imag()};
}

Vector functional_error(const Trajectory& surrogate,
                        const Matrix& time_derivative, const VectorField& field,
                        const Vector& params) {
  if (time_derivative.rows() != surrogate.states.rows() ||
      time_derivative.cols() != surrogate.states.cols()) {
    throw DimensionError("derivative matrix shape does not match trajectory");
  }
  const int n = surrogate.grid.n_points();
  Vector e(n);
  for (int k = 0; k < n; ++k) {
    const double t = surrogate.grid.time(k);
    e[k] = (time_derivative.row(k).transpose() -
            field(surrogate.row(k), params, t))
               .norm();
  }
  return e;
}

Vector solution_error(const Trajectory& surrogate, const Trajectory& reference) {
  require_same_grid(surrogate, reference);
  return (surrogate.states - reference.states).rowwise().norm();
}

}  // namespace surrovv
