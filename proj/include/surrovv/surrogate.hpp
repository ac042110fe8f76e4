#pragma once

#include "surrovv/dynamics.hpp"
#include "surrovv/sampling.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace surrovv {

/// Per-dimension affine input map: normalized = (raw - offset) / scale.
struct InputNormalization {
  Vector offset;
  Vector scale;

  /// Maps each side of `box` onto [-1, 1]; zero-width sides get scale 1.
  static InputNormalization fit(const OperatingBox& box);
  static InputNormalization identity(int dim);
  void validate() const;
};

/// Fully connected tanh network U(x0, u, tau) ~ x(tau). Inputs are stacked
/// as [x0; u; tau]; hidden layers use tanh, the output layer is affine.
class MlpSurrogate {
 public:
  MlpSurrogate() = default;
  /// All weights and biases zero; identity normalization.
  MlpSurrogate(int n_state, int n_u, std::vector<int> hidden = {64, 64, 64});

  /// Glorot-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  int n_state() const { return n_state_; }
  int n_u() const { return n_u_; }
  int n_in() const { return n_state_ + n_u_ + 1; }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  int n_layers() const { return static_cast<int>(weights_.size()); }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }
  InputNormalization& normalization() { return norm_; }
  const InputNormalization& normalization() const { return norm_; }

  /// Length of the time window the network was trained on (0 = unset).
  double t_max() const { return t_max_; }
  void set_t_max(double t) { t_max_ = t; }

  int parameter_count() const;
  Vector flat_parameters() const;
  void set_flat_parameters(const Vector& theta);

  Vector input(const Vector& x0, const Vector& u, double tau) const;

  nlohmann::json to_json() const;
  static MlpSurrogate from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static MlpSurrogate load(const std::filesystem::path& path);

  void validate() const;

 private:
  int n_state_ = 0;
  int n_u_ = 0;
  std::vector<int> layer_sizes_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
  InputNormalization norm_;
  double t_max_ = 0.0;
};

Vector forward(const MlpSurrogate& net, const Vector& x0, const Vector& u,
               double tau);

/// Exact dU/dtau (forward-mode through the network).
Vector time_derivative(const MlpSurrogate& net, const Vector& x0,
                       const Vector& u, double tau);

/// Exact Jacobian of U with respect to the raw inputs [x0; u; tau]
/// (n_state x n_in).
Matrix grad_inputs(const MlpSurrogate& net, const Vector& x0, const Vector& u,
                   double tau);

/// Training points; every column of an input matrix is [x0; u; tau].
struct TrainingSet {
  int n_state = 0;
  int n_u = 0;
  double t_max = 0.0;
  Matrix collocation;   ///< residual points
  Matrix data_inputs;   ///< supervised points
  Matrix data_targets;  ///< n_state x N_d reference states
  Matrix ic_inputs;     ///< tau = 0 rows; target is the x0 block

  int n_r() const { return static_cast<int>(collocation.cols()); }
  int n_d() const { return static_cast<int>(data_inputs.cols()); }
  int n_0() const { return static_cast<int>(ic_inputs.cols()); }
  void validate() const;
};

/// Low-discrepancy training set over `box` (covering [x0; u]) with
/// tau in [0, t_max]. Data targets come from RK4 with steps of at most
/// `data_dt`.
TrainingSet make_training_set(const VectorField& field, const OperatingBox& box,
                              double t_max, int n_r, int n_d, int n_0,
                              std::uint64_t seed, double data_dt = 1e-3);

struct LossBreakdown {
  double total = 0.0;
  double residual = 0.0;
  double data = 0.0;
  double ic = 0.0;
};

struct LossAndGradient {
  LossBreakdown loss;
  Vector gradient;  ///< same layout as MlpSurrogate::flat_parameters()
};

/// Three-term physics-informed loss (mean-squared residual, data and
/// initial-condition terms) with its exact parameter gradient. Empty terms
/// contribute zero.
LossAndGradient grad_params(const MlpSurrogate& net, const TrainingSet& set,
                            const VectorField& field);

LossBreakdown loss_only(const MlpSurrogate& net, const TrainingSet& set,
                        const VectorField& field);

enum class OptimizerKind { kAdam, kLbfgs };

struct TrainOptions {
  OptimizerKind optimizer = OptimizerKind::kLbfgs;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  double adam_lr = 1e-3;
  int lbfgs_history = 10;
  /// Adam mini-batch size over collocation points (0 = full batch).
  int batch_size = 0;
  /// Stop once the full loss drops below this value.
  double loss_target = 0.0;
};

struct TrainEvent {
  int iteration = 0;
  std::string what;
};

struct TrainResult {
  MlpSurrogate net;
  std::vector<double> loss_history;  ///< loss before the first step, then after each step
  std::vector<TrainEvent> events;
};

TrainResult train(const MlpSurrogate& net, const TrainingSet& set,
                  const VectorField& field, const TrainOptions& options);

/// Anything that maps (x0, u) to a trajectory on a grid and can
/// differentiate a row of it with respect to [x0; u].
class TrajectoryModel {
 public:
  virtual ~TrajectoryModel() = default;
  virtual int n_state() const = 0;
  virtual int n_u() const = 0;
  virtual Trajectory simulate(const Vector& x0, const Vector& u,
                              const TimeGrid& grid) const = 0;
  /// d row_k / d [x0; u], shape n_state x (n_state + n_u).
  virtual Matrix row_jacobian(const Vector& x0, const Vector& u,
                              const TimeGrid& grid, int k) const = 0;
};

/// Evaluates U on each grid time. Inside [0, t_max] this is direct
/// evaluation at tau = t - t0; beyond, the state is re-anchored every t_max
/// seconds on the network's own prediction.
Trajectory surrogate_trajectory(const MlpSurrogate& net, const Vector& x0,
                                const Vector& u, const TimeGrid& grid);

/// dU/dt along surrogate_trajectory (exact, per hop).
Matrix surrogate_time_derivative(const MlpSurrogate& net, const Vector& x0,
                                 const Vector& u, const TimeGrid& grid);

class MlpTrajectoryModel final : public TrajectoryModel {
 public:
  explicit MlpTrajectoryModel(MlpSurrogate net) : net_(std::move(net)) {}
  int n_state() const override { return net_.n_state(); }
  int n_u() const override { return net_.n_u(); }
  Trajectory simulate(const Vector& x0, const Vector& u,
                      const TimeGrid& grid) const override;
  Matrix row_jacobian(const Vector& x0, const Vector& u, const TimeGrid& grid,
                      int k) const override;
  const MlpSurrogate& net() const { return net_; }

 private:
  MlpSurrogate net_;
};

}  // namespace surrovv
