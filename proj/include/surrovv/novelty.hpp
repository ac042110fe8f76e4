#pragma once

#include "surrovv/dynamics.hpp"
#include "surrovv/sampling.hpp"
#include "surrovv/surrogate.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace surrovv {

/// Trajectories on one shared grid plus the soft-min sharpness beta.
struct TrajectoryArchive {
  double beta = 1.0;
  std::vector<Trajectory> members;

  int size() const { return static_cast<int>(members.size()); }
  void add(Trajectory t);
  void validate() const;
};

/// Root of the grid-point mean of ||a_k - b_k||^2.
double traj_distance(const Trajectory& a, const Trajectory& b);

/// -(1/beta) log sum_i exp(-beta d_i^2), evaluated with log-sum-exp.
/// +inf for an empty archive.
double novelty_score(const Trajectory& candidate, const TrajectoryArchive& archive);

using TrajectoryGenerator = std::function<Trajectory(const Vector& eta)>;

struct SamplingResult {
  TrajectoryArchive archive;
  std::vector<Vector> etas;  ///< chosen eta per archive member
  int evals = 0;             ///< generator calls
};

/// Greedy novelty sampling. Round one draws and keeps a single candidate;
/// every later round draws min(candidates_per_round, remaining budget)
/// candidates from UniformSampler(box, seed) and keeps the most novel one.
SamplingResult novelty_sample(const TrajectoryGenerator& generator,
                              const OperatingBox& box, int budget,
                              int candidates_per_round, double beta,
                              std::uint64_t seed);

/// Same draws and rounds as novelty_sample, keeping the first candidate of
/// each round.
SamplingResult naive_sample(const TrajectoryGenerator& generator,
                            const OperatingBox& box, int budget,
                            int candidates_per_round, double beta,
                            std::uint64_t seed);

/// Mean over eta of the grid-mean squared solution error between the
/// surrogate and the RK4 reference (eta = [x0; u]).
double mean_mse_eval(const std::vector<Vector>& etas, const TrajectoryModel& model,
                     const VectorField& field, const TimeGrid& grid);

struct SamplingRow {
  std::string method;
  std::uint64_t seed = 0;
  double mean_mse = 0.0;
};

void write_sampling_csv(std::ostream& os, const std::vector<SamplingRow>& rows);

}  // namespace surrovv
