#pragma once

#include "surrovv/bounds.hpp"
#include "surrovv/dynamics.hpp"
#include "surrovv/machines.hpp"

#include <filesystem>
#include <vector>

namespace surrovv {

/// Where the interface disturbance enters the network solve.
enum class InjectionPoint {
  /// Added to the machine's Norton current before the network is re-solved;
  /// the line sees d * X_d' / X_eq.
  kPreSolve,
  /// Added to the already solved terminal current.
  kPostSolve,
};

struct SmibConfig {
  MachineParams machine;
  Complex V_inf{1.0, 0.0};
  double X_line = 0.0;
  TimeGrid grid{0.0, 0.01, 800};
  InjectionPoint injection = InjectionPoint::kPreSolve;

  double X_eq() const { return machine.X_d_prime + X_line; }
  void validate() const;
};

/// H=3.5, D=0, E'=1.1, X_d'=0.3, P_m0=0.7, dP_m=0.08, t_step=1 s.
MachineParams smib_benchmark_machine();

struct NetworkSolution {
  Complex I;    ///< terminal injected current
  Complex V;    ///< terminal voltage
  double P_e;   ///< Re(V conj(I))
};

/// I = (E' e^{j delta} - V_inf) / (j X_eq), V = V_inf + j X_line I.
NetworkSolution network_solve(double delta, const SmibConfig& cfg);

/// Network solve with an interface disturbance injected at cfg.injection.
NetworkSolution network_solve(double delta, const SmibConfig& cfg,
                              Complex disturbance);

struct Equilibrium {
  double delta0 = 0.0;
  double omega0 = 0.0;
};

/// Stable pre-step operating point: delta0 = angle(V_inf) +
/// asin(P_m0 X_eq / (E' |V_inf|)).
Equilibrium find_equilibrium(const SmibConfig& cfg);

/// Windowed current disturbance d(t) = amplitude * s(t) * e^{j phi}.
struct Disturbance {
  double epsilon = 0.02;
  double t_on = 1.2;
  double t_off = 3.0;
  double w = 0.03;
  double phi = 0.7;
  double amplitude = 0.0;

  void validate() const;
  Complex at(double t) const;
};

/// s(t) = 0.5 [tanh((t - t_on)/w) - tanh((t - t_off)/w)]
double window(double t, const Disturbance& d);

/// a = eps * X_eq / X_d', the amplitude that realizes an interface error of
/// about eps under pre-solve injection.
double nominal_amplitude(const SmibConfig& cfg, double eps);

/// Swing field of the SMIB machine. With a disturbance the electrical power
/// is Re(V^ conj(I^)) with I^ carrying d(t).
VectorField smib_field(const SmibConfig& cfg);
VectorField smib_field(const SmibConfig& cfg, const Disturbance& d);

struct PerturbationRunResult {
  Trajectory reference;
  Trajectory perturbed;
  Vector e_z;
  Vector e_x;
  Vector e_y;
  Vector e_sim;
  double max_e_z = 0.0;
  double max_e_sim = 0.0;
  double amplitude = 0.0;
};

/// Reference and disturbed simulations from the same equilibrium, with the
/// error series of both runs on the shared grid.
PerturbationRunResult perturbation_run(const SmibConfig& cfg,
                                       const Disturbance& d);

/// Bisection on the amplitude so that max e_z hits target_eps within
/// 1e-4 relative (at most 40 steps), starting from nominal_amplitude.
double calibrate_amplitude(const SmibConfig& cfg, const Disturbance& d,
                           double target_eps);

struct SweepRow {
  double x_line = 0.0;
  double amplitude = 0.0;
  double max_e_z = 0.0;
  double max_e_sim = 0.0;
  double max_e_x = 0.0;
  double e_x_final = 0.0;
  double e_y_final = 0.0;
};

/// One calibrated perturbation run per X_line value (rows run in parallel,
/// results ordered as the input).
std::vector<SweepRow> xline_sweep(const SmibConfig& base, const Disturbance& d,
                                  double target_eps,
                                  const std::vector<double>& xline_values);

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows);
/// Header `t,e_z,e_x,e_y,e_sim`.
void write_perturbation_csv(const std::filesystem::path& path,
                            const PerturbationRunResult& run);

enum class SmibCouplingForm {
  /// Machine power written through the terminal voltage only:
  /// P_e = Im(V conj(V_inf)) / X_line. Exact for the disturbed runs.
  kNetworkSide,
  /// Machine power from the rotor EMF behind X_d':
  /// P_e = Re(V conj((E' e^{j delta} - V) / (j X_d'))).
  kMachineSide,
};

/// SMIB as a coupled DAE for constant estimation: x = [delta, omega],
/// y = [Re V, Im V], z = [Re I, Im I], u = [P_m0].
CoupledSystem smib_coupled_system(const SmibConfig& cfg, SmibCouplingForm form);

}  // namespace surrovv
