#pragma once

#include "surrovv/conformal.hpp"
#include "surrovv/machines.hpp"
#include "surrovv/sampling.hpp"
#include "surrovv/smib.hpp"
#include "surrovv/surrogate.hpp"
#include "surrovv/verify.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace surrovv::harness {

enum class ExperimentKind {
  kSmibDemo,
  kXlineSweep,
  kTrain,
  kVerify,
  kBoxShrink,
  kNovelty,
  kCalibrate,
  kBoundReport,
};

ExperimentKind parse_experiment(const std::string& name);
std::string to_string(ExperimentKind k);
const std::vector<std::string>& experiment_names();

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::string> experiment;
};

struct SurrogateSection {
  std::vector<int> hidden{64, 64, 64};
  double t_max = 0.2;
  std::optional<std::filesystem::path> weights;  ///< load instead of training
};

struct TrainingSection {
  bool present = false;
  TrainOptions options;
  int n_r = 2000;
  int n_d = 200;
  int n_0 = 200;
  double data_dt = 1e-3;
  OperatingBox box;  ///< over [x0; u]
};

struct VerifySection {
  std::optional<OperatingBox> box;  ///< defaults to the training box
  double T = 1.0;
  double dt = 0.01;
  SearchBudget budget;
  std::vector<std::string> methods{"random", "pgd", "adam", "sgd", "lbfgs", "blackbox"};
  double step = 0.1;
  int n_seeds = 10;
  double kappa = 1.0;
};

struct BoxShrinkSection {
  std::vector<double> widths{1.0, 0.75, 0.5, 0.25};
  std::string method = "pgd";
};

struct BoundSection {
  bool present = false;
  double Delta = 0.0;
  std::optional<double> eps;  ///< defaults to the disturbance epsilon
  int n_samples = 200;
  double fd_step = 1e-6;
  SmibCouplingForm form = SmibCouplingForm::kNetworkSide;
  OperatingBox box;  ///< over [x; z; u]
  std::optional<double> T;  ///< defaults to the SMIB horizon
};

struct NoveltySection {
  bool present = false;
  double beta = 1.0;
  int budget = 64;
  int candidates_per_round = 8;
  int n_seeds = 10;
  std::optional<OperatingBox> box;
  double T = 1.0;
  double dt = 0.01;
};

struct DatasetSection {
  std::string source = "synthetic";  ///< synthetic | csv | iq-playback
  // synthetic
  int n = 2000;
  double noise = 0.1;
  // csv
  std::filesystem::path path;
  std::vector<std::string> features;
  std::string target;
  std::string prediction;
  std::string sigma_column;
  // iq-playback
  int n_trajectories = 40;
  int points_per_trajectory = 50;
  std::optional<OperatingBox> box;
  double T = 1.0;
  double dt = 0.01;
};

struct ConformalSection {
  bool present = false;
  double alpha = 0.05;
  double delta = 0.05;
  double sigma = 1.0;
  std::optional<double> sigma_max;
  std::vector<double> rhos{0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  int n_repeats = 1000;
  int max_test = 0;
  DatasetSection dataset;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kSmibDemo;
  std::string model = "sm2";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  SmibConfig smib;
  Disturbance disturbance;
  std::vector<double> sweep;
  SurrogateSection surrogate;
  TrainingSection training;
  VerifySection verify;
  BoxShrinkSection box_shrink;
  BoundSection bound;
  NoveltySection novelty;
  ConformalSection conformal;
  /// Every value used by the run, defaults included.
  nlohmann::json resolved;
};

/// Strict parse: unknown keys, wrong types and missing required values all
/// raise ConfigError. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const Overrides& overrides,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const Overrides& overrides);

/// Swing or two-axis field for the configured model, p = [P_m0].
VectorField model_field(const ExperimentConfig& cfg);

/// Runs the experiment, writing config.resolved.json, its CSVs,
/// summary.json and plot data into cfg.output_dir. Returns the summary.
nlohmann::json run_experiment(const ExperimentConfig& cfg);

/// Whitespace-separated gnuplot files under out_dir/plot, one per figure
/// panel, built from whichever experiment CSVs exist. Throws ConfigError
/// when none are present.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& out_dir);

/// Loads, validates and runs. Exit status: 0 success, 2 invalid
/// configuration, 3 numerical failure, 1 anything else.
int run(const std::filesystem::path& config_path, const Overrides& overrides,
        std::ostream& diagnostics);

}  // namespace surrovv::harness
