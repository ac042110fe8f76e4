#include "surrovv/sampling.hpp"

#include "surrovv/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace surrovv {

OperatingBox::OperatingBox(Vector lo_, Vector hi_)
    : lo(std::move(lo_)), hi(std::move(hi_)) {
  validate();
}

void OperatingBox::validate() const {
  if (lo.size() != hi.size()) throw DimensionError("box lo/hi sizes differ");
  if (lo.size() == 0) throw ConfigError("box must have at least one dimension");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || lo[i] > hi[i]) {
      throw ConfigError("box needs finite lo <= hi in every dimension");
    }
  }
}

bool OperatingBox::contains(const Vector& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

Vector OperatingBox::project(const Vector& x) const {
  return x.cwiseMax(lo).cwiseMin(hi);
}

Vector OperatingBox::from_unit(const Vector& xi) const {
  return lo + width().cwiseProduct(xi);
}

Vector OperatingBox::to_unit(const Vector& x) const {
  Vector xi(x.size());
  const Vector w = width();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xi[i] = w[i] > 0.0 ? (x[i] - lo[i]) / w[i] : 0.5;
  }
  return xi;
}

OperatingBox OperatingBox::shrunk(double fraction) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("box shrink fraction must be in (0, 1]");
  }
  const Vector c = center();
  const Vector half = 0.5 * fraction * width();
  return OperatingBox(c - half, c + half);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task_index) {
  return seed ^ mix64(task_index);
}

UniformSampler::UniformSampler(const OperatingBox& box, std::uint64_t seed)
    : box_(box), rng_(seed) {
  box_.validate();
}

double UniformSampler::unit() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

Vector UniformSampler::next() {
  Vector xi(box_.dim());
  for (auto& v : xi) v = unit();
  return box_.from_unit(xi);
}

namespace {
constexpr std::array<int, 24> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19,
                                         23, 29, 31, 37, 41, 43, 47, 53,
                                         59, 61, 67, 71, 73, 79, 83, 89};

double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0;
  double r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}
}  // namespace

Vector halton(std::uint64_t index, int dim) {
  if (dim > static_cast<int>(kPrimes.size())) {
    throw DimensionError("halton supports at most 24 dimensions");
  }
  Vector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = radical_inverse(index, kPrimes[d]);
  return v;
}

std::vector<Vector> halton_points(const OperatingBox& box, int n) {
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 1; i <= n; ++i) pts.push_back(box.from_unit(halton(i, box.dim())));
  return pts;
}

std::vector<Vector> rotated_halton_points(const OperatingBox& box, int n,
                                          std::uint64_t seed) {
  UniformSampler shift_rng(OperatingBox(Vector::Zero(box.dim()),
                                        Vector::Ones(box.dim())),
                           seed);
  const Vector shift = shift_rng.next();
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 1; i <= n; ++i) {
    Vector xi = halton(i, box.dim()) + shift;
    for (auto& v : xi) v -= std::floor(v);
    pts.push_back(box.from_unit(xi));
  }
  return pts;
}

}  // namespace surrovv
