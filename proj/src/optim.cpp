#include "surrovv/optim.hpp"

#include <algorithm>
#include <cmath>

namespace surrovv::optim {

namespace {

struct Probe {
  double a = 0.0;
  double f = 0.0;
  double d = 0.0;  // directional derivative
  Vector x;
  Vector g;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), or NaN.
double cubic_min(double a, double fa, double da, double b, double fb,
                 double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0.0) return std::nan("");
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0.0) return std::nan("");
  return b - (b - a) * (db + d2 - d1) / denom;
}

}  // namespace

LineSearchResult strong_wolfe_search(const Objective& fn, const Vector& x0,
                                     double f0, const Vector& g0,
                                     const Vector& direction,
                                     double initial_step,
                                     const WolfeParams& params) {
  LineSearchResult out;
  const double d0 = g0.dot(direction);
  if (!(d0 < 0.0) || !(initial_step > 0.0)) return out;

  auto probe = [&](double a) {
    Probe p;
    p.a = a;
    p.x = x0 + a * direction;
    p.g.resize(x0.size());
    p.f = fn(p.x, p.g);
    p.d = p.g.dot(direction);
    ++out.evals;
    return p;
  };
  auto armijo = [&](const Probe& p) {
    return std::isfinite(p.f) && p.f <= f0 + params.c1 * p.a * d0;
  };
  auto curvature = [&](const Probe& p) {
    return std::abs(p.d) <= -params.c2 * d0;
  };
  auto accept = [&](const Probe& p, bool wolfe) {
    out.decreased = true;
    out.wolfe = wolfe;
    out.step = p.a;
    out.f = p.f;
    out.x = p.x;
    out.g = p.g;
  };

  Probe lo;
  lo.a = 0.0;
  lo.f = f0;
  lo.d = d0;
  bool have_lo_point = false;  // lo.a > 0 with Armijo decrease
  Probe hi;
  bool bracketed = false;

  double a = std::min(initial_step, params.step_max);
  Probe prev = lo;
  while (out.evals < params.max_evals) {
    Probe p = probe(a);
    if (!armijo(p) || (out.evals > 1 && p.f >= prev.f)) {
      lo = prev;
      have_lo_point = prev.a > 0.0;
      hi = p;
      bracketed = true;
      break;
    }
    if (curvature(p)) {
      accept(p, true);
      return out;
    }
    if (p.d >= 0.0) {
      lo = p;
      have_lo_point = true;
      hi = prev;
      bracketed = true;
      break;
    }
    prev = p;
    if (a >= params.step_max) {
      accept(p, false);
      return out;
    }
    a = std::min(2.0 * a, params.step_max);
  }
  if (!bracketed) {
    if (prev.a > 0.0) accept(prev, false);
    return out;
  }

  // Zoom: lo always satisfies Armijo and has the lowest value seen in the
  // bracket; hi is the other end.
  while (out.evals < params.max_evals) {
    const double left = std::min(lo.a, hi.a);
    const double right = std::max(lo.a, hi.a);
    const double width = right - left;
    if (width <= 1e-16 * std::max(1.0, right)) break;
    double trial = std::nan("");
    if (std::isfinite(hi.f)) trial = cubic_min(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d);
    if (!std::isfinite(trial) || trial < left + 0.1 * width ||
        trial > right - 0.1 * width) {
      trial = 0.5 * (lo.a + hi.a);
    }
    Probe p = probe(trial);
    if (!armijo(p) || p.f >= lo.f) {
      hi = p;
    } else {
      if (curvature(p)) {
        accept(p, true);
        return out;
      }
      if (p.d * (hi.a - lo.a) >= 0.0) hi = lo;
      lo = p;
      have_lo_point = true;
    }
  }
  if (have_lo_point) accept(lo, false);
  return out;
}

bool LbfgsMemory::push(const Vector& s, const Vector& y) {
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm())) return false;
  s_.push_back(s);
  y_.push_back(y);
  if (static_cast<int>(s_.size()) > history_) {
    s_.pop_front();
    y_.pop_front();
  }
  return true;
}

Vector LbfgsMemory::direction(const Vector& g) const {
  Vector q = g;
  const std::size_t m = s_.size();
  std::vector<double> alpha(m);
  std::vector<double> rho(m);
  for (std::size_t i = m; i-- > 0;) {
    rho[i] = 1.0 / y_[i].dot(s_[i]);
    alpha[i] = rho[i] * s_[i].dot(q);
    q -= alpha[i] * y_[i];
  }
  if (m > 0) {
    q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = rho[i] * y_[i].dot(q);
    q += (alpha[i] - beta) * s_[i];
  }
  return -q;
}

void LbfgsMemory::clear() {
  s_.clear();
  y_.clear();
}

Vector Adam::step(const Vector& g) {
  if (m_.size() != g.size()) {
    m_ = Vector::Zero(g.size());
    v_ = Vector::Zero(g.size());
    t_ = 0;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * g;
  v_ = beta2_ * v_ + (1.0 - beta2_) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  Vector delta(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    delta[i] = -lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
  return delta;
}

void Adam::reset() {
  m_.resize(0);
  v_.resize(0);
  t_ = 0;
}

}  // namespace surrovv::optim
