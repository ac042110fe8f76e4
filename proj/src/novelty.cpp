#include "surrovv/novelty.hpp"

#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"
#include "surrovv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace surrovv {

void TrajectoryArchive::add(Trajectory t) {
  if (!members.empty()) require_same_grid(members.front(), t);
  members.push_back(std::move(t));
}

void TrajectoryArchive::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("novelty beta must be finite and > 0");
  }
  for (std::size_t i = 1; i < members.size(); ++i) {
    require_same_grid(members.front(), members[i]);
  }
}

double traj_distance(const Trajectory& a, const Trajectory& b) {
  require_same_grid(a, b);
  const Matrix d = a.states - b.states;
  return std::sqrt(d.rowwise().squaredNorm().mean());
}

double novelty_score(const Trajectory& candidate, const TrajectoryArchive& archive) {
  archive.validate();
  if (archive.members.empty()) return std::numeric_limits<double>::infinity();
  std::vector<double> expo;
  expo.reserve(archive.members.size());
  for (const auto& m : archive.members) {
    const double d = traj_distance(candidate, m);
    expo.push_back(-archive.beta * d * d);
  }
  const double top = *std::max_element(expo.begin(), expo.end());
  double sum = 0.0;
  for (double e : expo) sum += std::exp(e - top);
  return -(top + std::log(sum)) / archive.beta;
}

namespace {

SamplingResult sample(const TrajectoryGenerator& generator, const OperatingBox& box,
                      int budget, int cpr, double beta, std::uint64_t seed,
                      bool by_novelty) {
  box.validate();
  if (budget < 1) throw ConfigError("sampling budget must be >= 1");
  if (cpr < 1) throw ConfigError("candidates_per_round must be >= 1");
  SamplingResult res;
  res.archive.beta = beta;
  res.archive.validate();
  UniformSampler sampler(box, seed);
  bool first_round = true;
  while (res.evals < budget) {
    const int n = first_round ? 1 : std::min(cpr, budget - res.evals);
    first_round = false;
    std::vector<Vector> etas;
    for (int i = 0; i < n; ++i) etas.push_back(sampler.next());
    std::vector<Trajectory> trajs(etas.size());
    parallel_for(etas.size(), [&](std::size_t i) { trajs[i] = generator(etas[i]); });
    res.evals += n;
    std::size_t keep = 0;
    if (by_novelty && res.archive.size() > 0) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < trajs.size(); ++i) {
        const double s = novelty_score(trajs[i], res.archive);
        if (s > best) {
          best = s;
          keep = i;
        }
      }
    }
    res.archive.add(std::move(trajs[keep]));
    res.etas.push_back(etas[keep]);
  }
  return res;
}

}  // namespace

SamplingResult novelty_sample(const TrajectoryGenerator& generator,
                              const OperatingBox& box, int budget,
                              int candidates_per_round, double beta,
                              std::uint64_t seed) {
  return sample(generator, box, budget, candidates_per_round, beta, seed, true);
}

SamplingResult naive_sample(const TrajectoryGenerator& generator,
                            const OperatingBox& box, int budget,
                            int candidates_per_round, double beta,
                            std::uint64_t seed) {
  return sample(generator, box, budget, candidates_per_round, beta, seed, false);
}

double mean_mse_eval(const std::vector<Vector>& etas, const TrajectoryModel& model,
                     const VectorField& field, const TimeGrid& grid) {
  if (etas.empty()) throw ConfigError("mean_mse_eval needs at least one eta");
  const int ns = model.n_state();
  std::vector<double> mse(etas.size());
  parallel_for(etas.size(), [&](std::size_t i) {
    if (etas[i].size() != ns + model.n_u()) throw DimensionError("eta has wrong size");
    const Vector x0 = etas[i].head(ns);
    const Vector u = etas[i].tail(model.n_u());
    const Trajectory ref = integrate_rk4(field, x0, u, grid);
    const Trajectory sur = model.simulate(x0, u, grid);
    mse[i] = (sur.states - ref.states).rowwise().squaredNorm().mean();
  });
  double sum = 0.0;
  for (double v : mse) sum += v;
  return sum / static_cast<double>(mse.size());
}

void write_sampling_csv(std::ostream& os, const std::vector<SamplingRow>& rows) {
  io::CsvTable t({"method", "seed", "mean_mse"});
  for (const auto& r : rows) {
    t.add_row({r.method, std::to_string(r.seed), io::format_double(r.mean_mse)});
  }
  os << t.str();
}

}  // namespace surrovv
