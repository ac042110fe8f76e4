#pragma once

#include "surrovv/dynamics.hpp"

#include <deque>
#include <functional>

namespace surrovv::optim {

/// f(x) with its gradient written into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct WolfeParams {
  double c1 = 1e-4;  ///< sufficient decrease
  double c2 = 0.9;   ///< curvature (strong form |phi'(a)| <= c2 |phi'(0)|)
  int max_evals = 25;
  double step_max = 1e10;
};

struct LineSearchResult {
  bool decreased = false;  ///< a point with Armijo decrease was found
  bool wolfe = false;      ///< ... and it also meets the strong curvature test
  double step = 0.0;
  double f = 0.0;
  Vector x;
  Vector g;
  int evals = 0;
};

/// Bracketing/zoom line search with safeguarded cubic interpolation.
/// Requires a descent direction (g0 . d < 0).
LineSearchResult strong_wolfe_search(const Objective& fn, const Vector& x0,
                                     double f0, const Vector& g0,
                                     const Vector& direction,
                                     double initial_step,
                                     const WolfeParams& params = {});

/// Limited-memory inverse-Hessian approximation (two-loop recursion).
class LbfgsMemory {
 public:
  explicit LbfgsMemory(int history = 10) : history_(history) {}

  /// Stores the pair when s.y > 0; returns whether it was stored.
  bool push(const Vector& s, const Vector& y);
  /// -H g, or -g when the memory is empty.
  Vector direction(const Vector& g) const;
  void clear();
  int size() const { return static_cast<int>(s_.size()); }

 private:
  int history_;
  std::deque<Vector> s_;
  std::deque<Vector> y_;
};

/// Adam update rule for minimization.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Increment to add to the parameters for gradient g.
  Vector step(const Vector& g);
  void reset();

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  Vector m_;
  Vector v_;
  int t_ = 0;
};

}  // namespace surrovv::optim
