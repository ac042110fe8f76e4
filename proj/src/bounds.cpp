#include "surrovv/bounds.hpp"

#include "surrovv/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace surrovv {

void BoundConstants::validate() const {
  if (!(K_yz >= 0.0) || !(K_yx >= 0.0) || !(L_y >= 0.0)) {
    throw ConfigError("bound constants K_yz, K_yx, L_y must be >= 0");
  }
  if (!std::isfinite(mu_cl)) throw ConfigError("mu_cl must be finite");
  if (!(T > 0.0)) throw ConfigError("bound horizon T must be > 0");
}

double phi(double T, double alpha) {
  if (!(T >= 0.0)) throw ContractViolation("phi needs T >= 0");
  const double aT = alpha * T;
  if (std::abs(aT) < 1e-8) {
    return T * (1.0 + aT / 2.0 + aT * aT / 6.0);
  }
  return std::expm1(aT) / alpha;
}

TheoremBounds theorem_bounds(const BoundConstants& c, double eps) {
  c.validate();
  if (!(eps >= 0.0)) throw ContractViolation("theorem_bounds needs eps >= 0");
  TheoremBounds b;
  b.ex = c.L_y * c.K_yz * phi(c.T, c.alpha()) * eps;
  b.ey = c.K_yx * b.ex + c.K_yz * eps;
  b.total = b.ex + b.ey;
  return b;
}

namespace {
double amplification(const BoundConstants& c) {
  return (1.0 + c.K_yx) * c.L_y * c.K_yz * phi(c.T, c.alpha()) + c.K_yz;
}
}  // namespace

double eps_max(const BoundConstants& c, double Delta) {
  c.validate();
  if (!(Delta > 0.0)) throw ContractViolation("eps_max needs Delta > 0");
  const double denom = amplification(c);
  if (!(denom > 0.0)) {
    throw DegenerateCoupling(
        "interface has no influence on the simulator (K_yz = 0); the bound is "
        "vacuous");
  }
  return Delta / denom;
}

double propagate_calibrated_bound(const BoundConstants& c, double eps_bar) {
  c.validate();
  if (!(eps_bar >= 0.0)) {
    throw ContractViolation("propagate_calibrated_bound needs eps_bar >= 0");
  }
  return theorem_bounds(c, eps_bar).total;
}

namespace {

using Fn = std::function<Vector(const Vector&)>;

Matrix central_jacobian(const Fn& fn, const Vector& at, double rel_step) {
  const Vector f0 = fn(at);
  Matrix J(f0.size(), at.size());
  Vector p = at;
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    const double h = rel_step * (1.0 + std::abs(at[j]));
    p[j] = at[j] + h;
    const Vector fp = fn(p);
    p[j] = at[j] - h;
    const Vector fm = fn(p);
    p[j] = at[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

double induced_two_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

double max_sym_eigenvalue(const Matrix& A) {
  const Matrix S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

SampleConstants local_constants(const CoupledSystem& model, const Vector& point,
                                double fd_step) {
  const int nx = model.n_x;
  const int nz = model.n_z;
  const int nu = model.n_u;
  if (point.size() != nx + nz + nu) {
    throw DimensionError("constant-estimation point must be [x; z; u]");
  }
  const Vector x = point.head(nx);
  const Vector z = point.segment(nx, nz);
  const Vector u = point.tail(nu);

  SampleConstants s;
  s.point = point;
  try {
    const Vector y = model.algebraic(x, z, u);
    if (y.size() != model.n_y || !y.allFinite()) {
      throw SingularNetwork("algebraic map returned an invalid solution");
    }
    const Matrix Jyz = central_jacobian(
        [&](const Vector& zz) { return model.algebraic(x, zz, u); }, z, fd_step);
    const Matrix Jyx = central_jacobian(
        [&](const Vector& xx) { return model.algebraic(xx, z, u); }, x, fd_step);
    const Matrix Jfy = central_jacobian(
        [&](const Vector& yy) { return model.f(x, yy, u, 0.0); }, y, fd_step);
    const Matrix Jfx = central_jacobian(
        [&](const Vector& xx) { return model.f(xx, y, u, 0.0); }, x, fd_step);
    if (!Jyz.allFinite() || !Jyx.allFinite() || !Jfy.allFinite() ||
        !Jfx.allFinite()) {
      throw SingularNetwork("non-finite Jacobian at sample");
    }
    s.K_yz = induced_two_norm(Jyz);
    s.K_yx = induced_two_norm(Jyx);
    s.L_y = induced_two_norm(Jfy);
    s.mu_cl = max_sym_eigenvalue(Jfx);
  } catch (const SingularNetwork&) {
    s.skipped = true;
  }
  return s;
}

ConstantEstimate estimate_constants(const CoupledSystem& model,
                                    const OperatingBox& box, int n_samples,
                                    double fd_step, double horizon) {
  if (n_samples < 1) throw ContractViolation("estimate_constants needs n_samples >= 1");
  if (!(fd_step > 0.0)) throw ContractViolation("fd_step must be > 0");
  box.validate();
  if (box.dim() != model.n_x + model.n_z + model.n_u) {
    throw DimensionError("box must cover [x; z; u]");
  }
  ConstantEstimate est;
  est.constants.T = horizon;
  est.constants.K_yz = 0.0;
  est.constants.K_yx = 0.0;
  est.constants.L_y = 0.0;
  est.constants.mu_cl = -std::numeric_limits<double>::infinity();
  for (const Vector& pt : halton_points(box, n_samples)) {
    SampleConstants s = local_constants(model, pt, fd_step);
    if (s.skipped) {
      ++est.n_skipped;
    } else {
      est.constants.K_yz = std::max(est.constants.K_yz, s.K_yz);
      est.constants.K_yx = std::max(est.constants.K_yx, s.K_yx);
      est.constants.L_y = std::max(est.constants.L_y, s.L_y);
      est.constants.mu_cl = std::max(est.constants.mu_cl, s.mu_cl);
    }
    est.samples.push_back(std::move(s));
  }
  if (2 * est.n_skipped > n_samples) {
    throw EstimationFailure(std::to_string(est.n_skipped) + " of " +
                            std::to_string(n_samples) +
                            " samples hit a singular algebraic solve");
  }
  return est;
}

nlohmann::json bound_report(const BoundConstants& c, double eps, double Delta) {
  const TheoremBounds b = theorem_bounds(c, eps);
  nlohmann::json j;
  j["K_yz"] = c.K_yz;
  j["K_yx"] = c.K_yx;
  j["L_y"] = c.L_y;
  j["mu_cl"] = c.mu_cl;
  j["alpha"] = c.alpha();
  j["T"] = c.T;
  j["phi"] = phi(c.T, c.alpha());
  j["eps"] = eps;
  j["bound_ex"] = b.ex;
  j["bound_ey"] = b.ey;
  j["bound_total"] = b.total;
  if (Delta > 0.0) {
    j["eps_max"] = eps_max(c, Delta);
  } else {
    j["eps_max"] = nullptr;
  }
  return j;
}

}  // namespace surrovv
