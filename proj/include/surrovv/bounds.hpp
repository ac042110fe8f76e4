#pragma once

#include "surrovv/dynamics.hpp"
#include "surrovv/sampling.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <vector>

namespace surrovv {

/// Constants of the finite-horizon acceptance bound. All Lipschitz
/// constants are induced 2-norms; mu_cl is a one-sided growth rate and may be
/// negative.
struct BoundConstants {
  double K_yz = 0.0;
  double K_yx = 0.0;
  double L_y = 0.0;
  double mu_cl = 0.0;
  double T = 1.0;

  /// alpha = mu_cl + L_y * K_yx
  double alpha() const { return mu_cl + L_y * K_yx; }
  void validate() const;
};

/// (e^{alpha T} - 1) / alpha, or T when alpha = 0. For |alpha T| < 1e-8 the
/// three-term series T (1 + aT/2 + (aT)^2/6) is used.
double phi(double T, double alpha);

struct TheoremBounds {
  double ex = 0.0;     ///< bound on ||e_x(T)||
  double ey = 0.0;     ///< bound on ||e_y(T)||
  double total = 0.0;  ///< ex + ey
};

TheoremBounds theorem_bounds(const BoundConstants& c, double eps);

/// Largest interface budget keeping ||e_x(T)|| + ||e_y(T)|| <= Delta.
double eps_max(const BoundConstants& c, double Delta);

/// Simulator-level deviation implied by a calibrated uniform interface
/// bound eps_bar (same expression as TheoremBounds::total).
double propagate_calibrated_bound(const BoundConstants& c, double eps_bar);

/// Reference DAE written for constant estimation:
///   dx/dt = f(x, y, u, t),  y = h(x, z, u)  (algebraic map solved for y),
/// with z the interface signal. `algebraic` may throw SingularNetwork (or
/// return non-finite values) at points where the algebraic solve fails.
struct CoupledSystem {
  int n_x = 0;
  int n_y = 0;
  int n_z = 0;
  int n_u = 0;
  std::function<Vector(const Vector& x, const Vector& y, const Vector& u,
                       double t)>
      f;
  std::function<Vector(const Vector& x, const Vector& z, const Vector& u)>
      algebraic;
};

struct SampleConstants {
  Vector point;  ///< [x; z; u]
  bool skipped = false;
  double K_yz = 0.0;
  double K_yx = 0.0;
  double L_y = 0.0;
  double mu_cl = 0.0;
};

struct ConstantEstimate {
  BoundConstants constants;
  std::vector<SampleConstants> samples;  ///< audit trail, in sample order
  int n_skipped = 0;
};

/// Estimates (K_yz, K_yx, L_y, mu_cl) as maxima over Halton samples of the
/// box over [x; z; u]. Jacobians use central differences with step
/// fd_step * (1 + |value|); K's and L_y are largest singular values, mu_cl
/// the largest eigenvalue of the symmetric part of df/dx.
ConstantEstimate estimate_constants(const CoupledSystem& model,
                                    const OperatingBox& box, int n_samples,
                                    double fd_step, double horizon);

/// Local constants at a single point [x; z; u].
SampleConstants local_constants(const CoupledSystem& model, const Vector& point,
                                double fd_step);

/// Report with fields K_yz, K_yx, L_y, mu_cl, alpha, T, phi, eps, bound_ex,
/// bound_ey, bound_total, eps_max. eps_max is null when Delta <= 0.
nlohmann::json bound_report(const BoundConstants& c, double eps, double Delta);

}  // namespace surrovv
