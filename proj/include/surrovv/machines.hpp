#pragma once

#include "surrovv/dynamics.hpp"

#include <complex>
#include <functional>
#include <optional>

namespace surrovv {

using Complex = std::complex<double>;

/// Synchronous-machine parameters in per-unit / seconds. The SM4 block is
/// optional and has no defaults.
struct MachineParams {
  double H = 0.0;
  double D = 0.0;
  double E_prime = 0.0;
  double X_d_prime = 0.0;
  double P_m0 = 0.0;
  double dP_m = 0.0;
  double t_step = 0.0;

  std::optional<double> X_q_prime;
  std::optional<double> X_d;
  std::optional<double> X_q;
  std::optional<double> T_d0_prime;
  std::optional<double> T_q0_prime;
  std::optional<double> E_fd;

  void validate() const;
  bool has_sm4() const;
  /// Throws ConfigError naming the first missing SM4 field.
  void require_sm4() const;
};

/// P_m(t) = P_m0 + dP_m * 1{t >= t_step}, with P_m0 supplied by the caller
/// (it is the field's parameter).
double mechanical_power(const MachineParams& m, double P_m0, double t);

/// Electrical power drawn from the machine as a function of its state.
/// `gradient` (d P_e / d x) is optional; without it the field falls back to
/// finite-difference Jacobians.
struct ElectricalPower {
  std::function<double(const Vector& x, double t)> value;
  std::function<Vector(const Vector& x, double t)> gradient;
};

/// Swing model over x = [delta, omega]; parameter vector p = [P_m0]:
///   d(delta)/dt = omega
///   2H d(omega)/dt = P_m(t) - P_e - D omega
VectorField sm2_field(const MachineParams& m, ElectricalPower electrical_power);

struct DqCurrents {
  double I_d = 0.0;
  double I_q = 0.0;
};

/// Network side of the two-axis model: stator currents in the rotor frame
/// for state x = [delta, omega, E_q', E_d'].
using NetworkCoupling = std::function<DqCurrents(const Vector& x, double t)>;

/// Two-axis model, states [delta, omega, E_q', E_d'], p = [P_m0]:
///   T_d0' dE_q'/dt = -E_q' - (X_d - X_d') I_d + E_fd
///   T_q0' dE_d'/dt = -E_d' + (X_q - X_q') I_q
///   P_e = E_d' I_d + E_q' I_q + (X_q' - X_d') I_d I_q
VectorField sm4_field(const MachineParams& m, NetworkCoupling coupling);

/// Lossless line of reactance X_line to an infinite bus, rotor-frame
/// convention with the q axis along delta.
NetworkCoupling sm4_infinite_bus(const MachineParams& m, Complex V_inf,
                                 double X_line);

/// Steady state of the two-axis model behind an infinite bus delivering
/// P_m (stable branch). Returns [delta, 0, E_q', E_d'].
Vector sm4_equilibrium(const MachineParams& m, Complex V_inf, double X_line,
                       double P_m);

enum class ParkConvention {
  kRotateByMinusDelta,  // I e^{-j delta}
  kRotateByPlusDelta,   // I e^{+j delta}
};

/// I_d = Re(I e^{-j delta}), I_q = Im(I e^{-j delta}) under the default
/// convention.
DqCurrents park_dq(Complex I, double delta,
                   ParkConvention convention = ParkConvention::kRotateByMinusDelta);

/// Per-grid-point ODE residual ||dU/dt(t_k) - f(U(t_k), p, t_k)||_2.
/// `time_derivative` has the same shape as the trajectory states.
Vector functional_error(const Trajectory& surrogate,
                        const Matrix& time_derivative, const VectorField& field,
                        const Vector& params);

/// Per-grid-point ||U(t_k) - G(t_k)||_2.
Vector solution_error(const Trajectory& surrogate, const Trajectory& reference);

}  // namespace surrovv
