#pragma once

#include "surrovv/dynamics.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace surrovv {

/// Axis-aligned admissible set over optimized variables.
struct OperatingBox {
  Vector lo;
  Vector hi;

  OperatingBox() = default;
  OperatingBox(Vector lo_, Vector hi_);

  int dim() const { return static_cast<int>(lo.size()); }
  Vector center() const { return 0.5 * (lo + hi); }
  Vector width() const { return hi - lo; }
  bool contains(const Vector& x, double tol = 0.0) const;
  /// Per-dimension clamp.
  Vector project(const Vector& x) const;
  /// Point at unit-cube coordinates xi in [0,1]^d.
  Vector from_unit(const Vector& xi) const;
  Vector to_unit(const Vector& x) const;
  /// Box sharing this center with every side scaled by `fraction`.
  OperatingBox shrunk(double fraction) const;

  void validate() const;
};

/// splitmix64 finalizer; used to derive per-task seeds as seed ^ mix(index).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task_index);

/// Seeded uniform draws over a box. The sequence is shared by every search
/// method so start points line up across methods for a given seed.
class UniformSampler {
 public:
  UniformSampler(const OperatingBox& box, std::uint64_t seed);
  Vector next();
  /// Uniform double in [0, 1) built from the top 53 bits of the engine.
  double unit();

 private:
  OperatingBox box_;
  std::mt19937_64 rng_;
};

/// Radical-inverse Halton point (1-based index) in [0,1)^dim.
Vector halton(std::uint64_t index, int dim);

/// First n Halton points mapped into the box. Index 1 is the box center.
std::vector<Vector> halton_points(const OperatingBox& box, int n);

/// Halton points with a seeded Cranley-Patterson rotation, mapped into the
/// box. Deterministic given the seed; stratified like the plain sequence.
std::vector<Vector> rotated_halton_points(const OperatingBox& box, int n,
                                          std::uint64_t seed);

}  // namespace surrovv
