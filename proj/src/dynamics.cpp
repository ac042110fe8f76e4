#include "surrovv/dynamics.hpp"

#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace surrovv {

TimeGrid TimeGrid::over(double T, double dt, double t0) {
  if (!(dt > 0.0) || !(T > 0.0)) {
    throw ConfigError("time grid needs T > 0 and dt > 0");
  }
  TimeGrid g;
  g.t0 = t0;
  g.dt = dt;
  g.n_steps = std::max(1, static_cast<int>(std::lround(T / dt)));
  return g;
}

void TimeGrid::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("grid dt must be > 0");
  if (n_steps < 1) throw ConfigError("grid needs n_steps >= 1");
  if (!std::isfinite(t0)) throw ConfigError("grid t0 must be finite");
}

Vector VectorField::operator()(const Vector& x, const Vector& p,
                               double t) const {
  Vector out = eval(x, p, t);
  if (out.size() != n_state) {
    throw DimensionError("vector field returned " + std::to_string(out.size()) +
                         " components, expected " + std::to_string(n_state));
  }
  return out;
}

Matrix VectorField::state_jacobian(const Vector& x, const Vector& p,
                                   double t) const {
  if (jac_state) return jac_state(x, p, t);
  return fd_state_jacobian(*this, x, p, t);
}

Matrix VectorField::param_jacobian(const Vector& x, const Vector& p,
                                   double t) const {
  if (jac_param) return jac_param(x, p, t);
  return fd_param_jacobian(*this, x, p, t);
}

namespace {

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

}  // namespace

Matrix fd_state_jacobian(const VectorField& field, const Vector& x,
                         const Vector& p, double t) {
  Matrix J(field.n_state, x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = fd_step(x[j]);
    xp[j] = x[j] + h;
    const Vector fp = field(xp, p, t);
    xp[j] = x[j] - h;
    const Vector fm = field(xp, p, t);
    xp[j] = x[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

Matrix fd_param_jacobian(const VectorField& field, const Vector& x,
                         const Vector& p, double t) {
  Matrix J(field.n_state, p.size());
  Vector pp = p;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = fd_step(p[j]);
    pp[j] = p[j] + h;
    const Vector fp = field(x, pp, t);
    pp[j] = p[j] - h;
    const Vector fm = field(x, pp, t);
    pp[j] = p[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

double jacobian_mismatch(const VectorField& field, const Vector& center_x,
                         const Vector& center_p, double spread, int n_probes,
                         unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-spread, spread);
  double worst = 0.0;
  auto rel = [](const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
  };
  for (int i = 0; i < n_probes; ++i) {
    Vector x = center_x;
    Vector p = center_p;
    for (auto& v : x) v += U(rng);
    for (auto& v : p) v += U(rng);
    const double t = U(rng);
    if (field.jac_state) {
      worst = std::max(worst, rel(field.jac_state(x, p, t),
                                  fd_state_jacobian(field, x, p, t)));
    }
    if (field.jac_param && p.size() > 0) {
      worst = std::max(worst, rel(field.jac_param(x, p, t),
                                  fd_param_jacobian(field, x, p, t)));
    }
  }
  return worst;
}

Vector rk4_step(const VectorField& field, const Vector& x, const Vector& p,
                double t, double dt) {
  const double half = 0.5 * dt;
  const Vector k1 = field(x, p, t);
  const Vector k2 = field(x + half * k1, p, t + half);
  const Vector k3 = field(x + half * k2, p, t + half);
  const Vector k4 = field(x + dt * k3, p, t + dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate_rk4(const VectorField& field, const Vector& x0,
                         const Vector& params, const TimeGrid& grid) {
  grid.validate();
  if (x0.size() != field.n_state) {
    throw DimensionError("x0 has " + std::to_string(x0.size()) +
                         " entries, field expects " +
                         std::to_string(field.n_state));
  }
  if (params.size() != field.n_param) {
    throw DimensionError("params have " + std::to_string(params.size()) +
                         " entries, field expects " +
                         std::to_string(field.n_param));
  }
  if (!x0.allFinite() || !params.allFinite()) {
    throw ContractViolation("integrate_rk4 inputs must be finite");
  }
  Trajectory traj{grid, Matrix(grid.n_points(), field.n_state)};
  traj.states.row(0) = x0.transpose();
  Vector x = x0;
  for (int k = 0; k < grid.n_steps; ++k) {
    x = rk4_step(field, x, params, grid.time(k), grid.dt);
    if (!x.allFinite()) {
      throw DivergedTrajectory(
          static_cast<std::size_t>(k + 1),
          "trajectory diverged at step " + std::to_string(k + 1));
    }
    traj.states.row(k + 1) = x.transpose();
  }
  return traj;
}

AdjointResult backpropagate(const VectorField& field, const Trajectory& traj,
                            const Vector& params, const Matrix& row_gradient) {
  const TimeGrid& grid = traj.grid;
  if (row_gradient.rows() != traj.states.rows() ||
      row_gradient.cols() != traj.states.cols()) {
    throw DimensionError("objective gradient shape does not match trajectory");
  }
  const double h = grid.dt;
  const double half = 0.5 * h;

  Vector lam = row_gradient.row(grid.n_steps).transpose();
  Vector gp = Vector::Zero(params.size());
  for (int k = grid.n_steps - 1; k >= 0; --k) {
    const double t = grid.time(k);
    const Vector x = traj.row(k);
    // Recompute stage inputs of step k.
    const Vector k1 = field(x, params, t);
    const Vector X2 = x + half * k1;
    const Vector k2 = field(X2, params, t + half);
    const Vector X3 = x + half * k2;
    const Vector k3 = field(X3, params, t + half);
    const Vector X4 = x + h * k3;

    // x_{k+1} = x + h/6 (k1 + 2 k2 + 2 k3 + k4)
    Vector b1 = (h / 6.0) * lam;
    Vector b2 = (h / 3.0) * lam;
    Vector b3 = (h / 3.0) * lam;
    const Vector b4 = (h / 6.0) * lam;
    Vector lx = lam;

    const Vector g4 = field.state_jacobian(X4, params, t + h).transpose() * b4;
    if (params.size() > 0) {
      gp += field.param_jacobian(X4, params, t + h).transpose() * b4;
    }
    lx += g4;
    b3 += h * g4;

    const Vector g3 =
        field.state_jacobian(X3, params, t + half).transpose() * b3;
    if (params.size() > 0) {
      gp += field.param_jacobian(X3, params, t + half).transpose() * b3;
    }
    lx += g3;
    b2 += half * g3;

    const Vector g2 =
        field.state_jacobian(X2, params, t + half).transpose() * b2;
    if (params.size() > 0) {
      gp += field.param_jacobian(X2, params, t + half).transpose() * b2;
    }
    lx += g2;
    b1 += half * g2;

    lx += field.state_jacobian(x, params, t).transpose() * b1;
    if (params.size() > 0) {
      gp += field.param_jacobian(x, params, t).transpose() * b1;
    }

    lam = lx + row_gradient.row(k).transpose();
  }
  AdjointResult out;
  out.d_x0 = lam;
  out.d_params = gp;
  out.trajectory = traj;
  return out;
}

AdjointResult adjoint_gradient(const VectorField& field, const Vector& x0,
                               const Vector& params, const TimeGrid& grid,
                               const TrajectoryFunctional& objective) {
  if (!objective.value || !objective.row_gradient) {
    throw ContractViolation(
        "adjoint_gradient needs both the objective value and its row "
        "gradient");
  }
  Trajectory traj = integrate_rk4(field, x0, params, grid);
  const Matrix G = objective.row_gradient(traj);
  AdjointResult out = backpropagate(field, traj, params, G);
  out.value = objective.value(out.trajectory);
  return out;
}

void require_same_grid(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.states.rows() != b.states.rows() ||
      a.states.cols() != b.states.cols()) {
    throw DimensionError("trajectories are not on the same grid/dimension");
  }
}

GridMax max_over_grid(const Trajectory& a, const Trajectory& b) {
  require_same_grid(a, b);
  GridMax best;
  best.value = -1.0;
  for (int k = 0; k < a.grid.n_points(); ++k) {
    const double v = (a.states.row(k) - b.states.row(k)).norm();
    if (v > best.value) {
      best.value = v;
      best.index = k;
    }
  }
  best.time = a.grid.time(best.index);
  return best;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << 't';
  for (int j = 0; j < traj.n_state(); ++j) os << ",x" << (j + 1);
  os << '\n';
  for (int k = 0; k < traj.grid.n_points(); ++k) {
    os << io::format_double(traj.grid.time(k));
    for (int j = 0; j < traj.n_state(); ++j) {
      os << ',' << io::format_double(traj.states(k, j));
    }
    os << '\n';
  }
}

}  // namespace surrovv
