#pragma once

#include "surrovv/dynamics.hpp"
#include "surrovv/sampling.hpp"
#include "surrovv/surrogate.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace surrovv {

/// One objective evaluation. A diverged reference run is reported with
/// value +inf and an empty gradient.
struct ObjectiveValue {
  double value = 0.0;
  Vector gradient;
  bool diverged = false;
};

/// eta -> value (and gradient when requested).
using SearchObjective =
    std::function<ObjectiveValue(const Vector& eta, bool need_gradient)>;

/// Reference solver wrapped as a TrajectoryModel; row Jacobians come from
/// the discrete adjoint. Used as a self-comparison test double.
class ReferenceTrajectoryModel final : public TrajectoryModel {
 public:
  explicit ReferenceTrajectoryModel(VectorField field) : field_(std::move(field)) {}
  int n_state() const override { return field_.n_state; }
  int n_u() const override { return field_.n_param; }
  Trajectory simulate(const Vector& x0, const Vector& u,
                      const TimeGrid& grid) const override;
  Matrix row_jacobian(const Vector& x0, const Vector& u, const TimeGrid& grid,
                      int k) const override;

 private:
  VectorField field_;
};

/// max_k ||U(eta, t_k) - G(eta, t_k)||_2 with eta = [x0; u]. The gradient
/// is taken at the earliest argmax row: the surrogate row Jacobian minus
/// the discrete adjoint of the RK4 reference, both contracted with the unit
/// discrepancy direction.
ObjectiveValue discrepancy_objective(const Vector& eta, const TrajectoryModel& model,
                                     const VectorField& field, const TimeGrid& grid,
                                     bool need_gradient = true);

SearchObjective make_discrepancy_objective(std::shared_ptr<const TrajectoryModel> model,
                                           VectorField field, TimeGrid grid);

struct SearchBudget {
  int restarts = 10;
  int total_evals = 100;

  int inner_iters() const { return total_evals / restarts; }
  void validate() const;
};

struct TracePoint {
  int iteration = 0;  ///< global evaluation index
  double value = 0.0;
};

struct SearchResult {
  Vector best_eta;
  double best_value = -std::numeric_limits<double>::infinity();
  int eval_count = 0;
  std::vector<TracePoint> trace;                    ///< finite values only
  std::vector<std::pair<Vector, double>> points;    ///< every finite evaluation
  std::vector<Vector> diverged;                     ///< etas whose reference run blew up
};

/// Wraps an objective and counts calls atomically.
class CountingObjective {
 public:
  explicit CountingObjective(SearchObjective inner) : inner_(std::move(inner)) {}
  ObjectiveValue operator()(const Vector& eta, bool need_gradient) const {
    ++count_;
    return inner_(eta, need_gradient);
  }
  int count() const { return count_.load(); }

 private:
  SearchObjective inner_;
  mutable std::atomic<int> count_{0};
};

/// Baseline: the first total_evals draws of UniformSampler(box, seed).
SearchResult random_search(const SearchObjective& objective, const OperatingBox& box,
                           const SearchBudget& budget, std::uint64_t seed);

enum class InnerMethod { kPgd, kAdam, kSgd, kLbfgs };

InnerMethod parse_inner_method(const std::string& name);
std::string to_string(InnerMethod m);

/// Multi-start projected ascent. Start points are the first `restarts`
/// draws of UniformSampler(box, seed); `warm_start` replaces the first one.
/// Each restart spends inner_iters evaluations (the remainder of
/// total_evals / restarts goes to the leading restarts), projecting onto
/// the box after every step. `step` is measured in unit-box coordinates.
SearchResult pgd_search(const SearchObjective& objective, const OperatingBox& box,
                        const SearchBudget& budget, InnerMethod inner, double step,
                        std::uint64_t seed,
                        const std::optional<Vector>& warm_start = std::nullopt);

/// Derivative-free rectangle partitioning. Cells are scored by their center
/// value plus kappa * half-diagonal * observed value range; the best cell is
/// trisected along its longest side and the two new centers evaluated.
/// Ties between cells are broken with the seeded generator.
SearchResult blackbox_search(const SearchObjective& objective, const OperatingBox& box,
                             const SearchBudget& budget, std::uint64_t seed,
                             const std::optional<Vector>& warm_start = std::nullopt,
                             double kappa = 1.0);

/// Runs one search on a (sub-)box, optionally warm-started.
using BoxSearcher = std::function<SearchResult(const OperatingBox& box,
                                               const std::optional<Vector>& warm)>;

struct BoxShrinkRow {
  double width_fraction = 0.0;
  double max_error = 0.0;
  double normalized_max_error = 0.0;
};

/// Nested boxes sharing the full box's center, searched from the widest to
/// the narrowest, each warm-started from the best in-box point found so
/// far. A box's reported value is the maximum over every evaluation of the
/// study that lies inside it, normalized by the full-box value.
std::vector<BoxShrinkRow> box_shrink_study(const BoxSearcher& search,
                                           const OperatingBox& box,
                                           const std::vector<double>& widths);

struct MethodRow {
  std::string method;
  std::uint64_t seed = 0;
  double best_value = 0.0;
  int evals = 0;
};

void write_methods_csv(std::ostream& os, const std::vector<MethodRow>& rows);
void write_box_shrink_csv(std::ostream& os, const std::vector<BoxShrinkRow>& rows);

}  // namespace surrovv
