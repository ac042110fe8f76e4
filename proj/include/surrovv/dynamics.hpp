#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>

namespace surrovv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform time grid. Point k sits at t0 + k*dt, computed directly rather
/// than accumulated.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.01;
  int n_steps = 1;

  double time(int k) const { return t0 + static_cast<double>(k) * dt; }
  double horizon() const { return static_cast<double>(n_steps) * dt; }
  double end() const { return time(n_steps); }
  int n_points() const { return n_steps + 1; }

  /// Grid covering [t0, t0 + T] with n_steps = round(T / dt).
  static TimeGrid over(double T, double dt, double t0 = 0.0);

  void validate() const;
  bool operator==(const TimeGrid&) const = default;
};

/// One simulated run: row k of `states` is the state at grid.time(k).
struct Trajectory {
  TimeGrid grid;
  Matrix states;

  int n_state() const { return static_cast<int>(states.cols()); }
  Vector row(int k) const { return states.row(k).transpose(); }
  Vector final_state() const { return row(grid.n_steps); }
};

/// Right-hand side dx/dt = f(x, p, t) with optional analytic Jacobians.
/// Missing Jacobians fall back to central differences with step
/// 1e-6 * (1 + |value|).
struct VectorField {
  using Eval = std::function<Vector(const Vector& x, const Vector& p, double t)>;
  using Jacobian =
      std::function<Matrix(const Vector& x, const Vector& p, double t)>;

  int n_state = 0;
  int n_param = 0;
  Eval eval;
  Jacobian jac_state;
  Jacobian jac_param;

  Vector operator()(const Vector& x, const Vector& p, double t) const;
  Matrix state_jacobian(const Vector& x, const Vector& p, double t) const;
  Matrix param_jacobian(const Vector& x, const Vector& p, double t) const;
};

Matrix fd_state_jacobian(const VectorField& field, const Vector& x,
                         const Vector& p, double t);
Matrix fd_param_jacobian(const VectorField& field, const Vector& x,
                         const Vector& p, double t);

/// Largest relative deviation between the analytic Jacobians of `field` and
/// finite differences over `n_probes` random points drawn from
/// x ~ center_x + U(-spread, spread), same for p. Returns 0 when the field
/// has no analytic Jacobians.
double jacobian_mismatch(const VectorField& field, const Vector& center_x,
                         const Vector& center_p, double spread, int n_probes,
                         unsigned long long seed);

/// Single classical RK4 step from (x, t).
Vector rk4_step(const VectorField& field, const Vector& x, const Vector& p,
                double t, double dt);

/// Fixed-step RK4 over `grid`. Throws DivergedTrajectory on the first
/// non-finite row.
Trajectory integrate_rk4(const VectorField& field, const Vector& x0,
                         const Vector& params, const TimeGrid& grid);

/// Differentiable functional of a trajectory. `row_gradient` returns a
/// matrix shaped like Trajectory::states holding dJ/d(row k).
struct TrajectoryFunctional {
  std::function<double(const Trajectory&)> value;
  std::function<Matrix(const Trajectory&)> row_gradient;
};

struct AdjointResult {
  double value = 0.0;
  Vector d_x0;
  Vector d_params;
  Trajectory trajectory;
};

/// Reverse-mode derivative of the discrete RK4 map: backpropagates the
/// functional through all four stages of every step.
AdjointResult adjoint_gradient(const VectorField& field, const Vector& x0,
                               const Vector& params, const TimeGrid& grid,
                               const TrajectoryFunctional& objective);

/// Same backward sweep for an already computed trajectory and a given
/// row-gradient matrix (used when the caller owns the forward pass).
AdjointResult backpropagate(const VectorField& field, const Trajectory& traj,
                            const Vector& params, const Matrix& row_gradient);

struct GridMax {
  double value = 0.0;
  double time = 0.0;
  int index = 0;
};

/// max_k ||a_k - b_k||_2 with earliest-time tie-breaking.
GridMax max_over_grid(const Trajectory& a, const Trajectory& b);

/// Header `t,x1,...,xn`, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

void require_same_grid(const Trajectory& a, const Trajectory& b);

}  // namespace surrovv
