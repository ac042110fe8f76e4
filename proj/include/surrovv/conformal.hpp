#pragma once

#include "surrovv/dynamics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace surrovv {

struct CalibrationSample {
  Vector features;
  double target = 0.0;
  double prediction = 0.0;
  double sigma = 1.0;
};

enum class ConformalMethod { kSplit, kUcb };

std::string to_string(ConformalMethod m);

struct CalibrationResult {
  double q = 0.0;  ///< +inf when the rule cannot certify at this n
  double alpha = 0.05;
  double delta = 0.05;  ///< only meaningful for the UCB rule
  ConformalMethod method = ConformalMethod::kSplit;
  int n_cal = 0;
  double empirical_coverage = 0.0;  ///< filled by evaluate_coverage
};

/// |r - r_hat| / sigma. Throws ScaleError for sigma <= 0.
double nonconformity(const CalibrationSample& s);

/// ceil((n+1)(1-alpha))-th smallest score, +inf past n.
double split_quantile(std::vector<double> scores, double alpha);

/// Smallest k with BinomialCDF(k-1; n, 1-alpha) >= 1-delta, returning the
/// k-th smallest score; +inf when no k <= n qualifies.
int ucb_rank(int n, double alpha, double delta);
double ucb_quantile(std::vector<double> scores, double alpha, double delta);

/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(int k, int n, double p);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool unbounded = false;

  bool contains(double r) const { return unbounded || (lo <= r && r <= hi); }
};

Interval interval(double q, double prediction, double sigma);

CalibrationResult calibrate(const std::vector<CalibrationSample>& calibration,
                            double alpha, ConformalMethod method, double delta = 0.05);

/// Fraction of `test` covered by the calibrated intervals; also stored in
/// result.empirical_coverage.
double evaluate_coverage(CalibrationResult& result,
                         const std::vector<CalibrationSample>& test);

struct CoverageRow {
  double rho = 0.0;
  ConformalMethod method = ConformalMethod::kSplit;
  double mean_coverage = 0.0;
  double mean_halfwidth = 0.0;  ///< +inf if any repeat was uncertifiable
  int n_cal = 0;
  std::vector<double> coverages;  ///< per repeat
};

struct CoverageOptions {
  double alpha = 0.05;
  double delta = 0.05;
  int n_repeats = 1000;
  std::uint64_t seed = 0;
  /// Test points used per repeat (0 = every point left after calibration).
  int max_test = 0;
};

/// For each ratio, repeatedly shuffles the data, calibrates on the first
/// floor(rho * n) samples and tests on the rest. Rows are ordered by rho,
/// split before ucb.
std::vector<CoverageRow> coverage_experiment(const std::vector<CalibrationSample>& data,
                                             const std::vector<double>& rhos,
                                             const CoverageOptions& options);

void write_conformal_csv(std::ostream& os, const std::vector<CoverageRow>& rows);

/// q * sigma_max; throws NoCertificate for an infinite q.
double interface_eps_bar(const CalibrationResult& result, double sigma_max);

/// i.i.d. samples r = x1 + N(0, noise^2) with x1 ~ U(-1, 1), prediction x1,
/// sigma 1.
std::vector<CalibrationSample> synthetic_dataset(int n, double noise,
                                                 std::uint64_t seed);

/// Reads a playback CSV: feature columns, one target and one prediction
/// column, and an optional sigma column (empty name = sigma 1).
std::vector<CalibrationSample> read_calibration_csv(
    const std::filesystem::path& path, const std::vector<std::string>& feature_columns,
    const std::string& target_column, const std::string& prediction_column,
    const std::string& sigma_column = "");

void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationSample>& data);

}  // namespace surrovv
