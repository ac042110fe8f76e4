#include "surrovv/conformal.hpp"

#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"
#include "surrovv/parallel.hpp"
#include "surrovv/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace surrovv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
}

double order_statistic(std::vector<double>& scores, int k) {
  std::nth_element(scores.begin(), scores.begin() + (k - 1), scores.end());
  return scores[static_cast<std::size_t>(k - 1)];
}

}  // namespace

std::string to_string(ConformalMethod m) {
  return m == ConformalMethod::kSplit ? "split" : "ucb";
}

double nonconformity(const CalibrationSample& s) {
  if (!(s.sigma > 0.0)) throw ScaleError("sigma must be > 0");
  if (!std::isfinite(s.target) || !std::isfinite(s.prediction) ||
      !std::isfinite(s.sigma)) {
    throw ContractViolation("calibration sample has non-finite values");
  }
  return std::abs(s.target - s.prediction) / s.sigma;
}

double split_quantile(std::vector<double> scores, double alpha) {
  if (scores.empty()) throw ContractViolation("no calibration scores");
  check_alpha(alpha);
  const double n = static_cast<double>(scores.size());
  const double pos = (n + 1.0) * (1.0 - alpha);
  // Guard against 19.000000000000004-style products of exact integers.
  const int k = static_cast<int>(std::ceil(pos - 1e-12 * (n + 1.0)));
  if (k > static_cast<int>(scores.size())) return kInf;
  return order_statistic(scores, std::max(k, 1));
}

double binomial_cdf(int k, int n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double ln = std::lgamma(n + 1.0);
  double sum = 0.0;
  for (int j = 0; j <= k; ++j) {
    sum += std::exp(ln - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * lp +
                    (n - j) * lq);
  }
  return std::min(sum, 1.0);
}

int ucb_rank(int n, double alpha, double delta) {
  check_alpha(alpha);
  check_delta(delta);
  const double p = 1.0 - alpha;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double ln = std::lgamma(n + 1.0);
  double cdf = 0.0;  // BinomialCDF(k - 1)
  for (int k = 1; k <= n; ++k) {
    const int j = k - 1;
    cdf += std::exp(ln - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * lp +
                    (n - j) * lq);
    if (cdf >= 1.0 - delta) return k;
  }
  return n + 1;
}

double ucb_quantile(std::vector<double> scores, double alpha, double delta) {
  if (scores.empty()) throw ContractViolation("no calibration scores");
  const int n = static_cast<int>(scores.size());
  const int k = ucb_rank(n, alpha, delta);
  if (k > n) return kInf;
  return order_statistic(scores, k);
}

Interval interval(double q, double prediction, double sigma) {
  if (!(q >= 0.0)) throw ContractViolation("quantile must be >= 0");
  if (!(sigma > 0.0)) throw ScaleError("sigma must be > 0");
  Interval iv;
  if (std::isinf(q)) {
    iv.lo = -kInf;
    iv.hi = kInf;
    iv.unbounded = true;
    return iv;
  }
  iv.lo = prediction - q * sigma;
  iv.hi = prediction + q * sigma;
  return iv;
}

CalibrationResult calibrate(const std::vector<CalibrationSample>& calibration,
                            double alpha, ConformalMethod method, double delta) {
  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const auto& s : calibration) scores.push_back(nonconformity(s));
  CalibrationResult r;
  r.alpha = alpha;
  r.delta = delta;
  r.method = method;
  r.n_cal = static_cast<int>(calibration.size());
  r.q = method == ConformalMethod::kSplit ? split_quantile(std::move(scores), alpha)
                                          : ucb_quantile(std::move(scores), alpha, delta);
  return r;
}

double evaluate_coverage(CalibrationResult& result,
                         const std::vector<CalibrationSample>& test) {
  if (test.empty()) throw ContractViolation("no test samples");
  int hit = 0;
  for (const auto& s : test) {
    if (nonconformity(s) <= result.q) ++hit;
  }
  result.empirical_coverage = static_cast<double>(hit) / static_cast<double>(test.size());
  return result.empirical_coverage;
}

std::vector<CoverageRow> coverage_experiment(const std::vector<CalibrationSample>& data,
                                             const std::vector<double>& rhos,
                                             const CoverageOptions& opt) {
  check_alpha(opt.alpha);
  check_delta(opt.delta);
  if (opt.n_repeats < 1) throw ConfigError("n_repeats must be >= 1");
  if (opt.max_test < 0) throw ConfigError("max_test must be >= 0");
  const int n = static_cast<int>(data.size());
  std::vector<double> scores(data.size());
  std::vector<double> sigmas(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores[i] = nonconformity(data[i]);
    sigmas[i] = data[i].sigma;
  }

  std::vector<CoverageRow> rows;
  for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
    const double rho = rhos[ri];
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("calibration ratios must lie in (0, 1)");
    const int n_cal = static_cast<int>(std::floor(rho * n + 1e-9));
    if (n_cal < 1 || n - n_cal < 1) {
      throw InfeasibleSplit("ratio " + io::format_double(rho) + " leaves " +
                            std::to_string(n_cal) + " calibration and " +
                            std::to_string(n - n_cal) + " test points");
    }
    const int n_test = opt.max_test > 0 ? std::min(opt.max_test, n - n_cal) : n - n_cal;
    const int k_split = static_cast<int>(
        std::ceil((n_cal + 1.0) * (1.0 - opt.alpha) - 1e-12 * (n_cal + 1.0)));
    const int k_ucb = ucb_rank(n_cal, opt.alpha, opt.delta);

    std::vector<double> cov_s(static_cast<std::size_t>(opt.n_repeats));
    std::vector<double> cov_u(cov_s.size());
    std::vector<double> hw_s(cov_s.size());
    std::vector<double> hw_u(cov_s.size());
    parallel_for(cov_s.size(), [&](std::size_t rep) {
      std::mt19937_64 rng(derive_seed(derive_seed(opt.seed, ri), rep));
      std::vector<int> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      }
      std::vector<double> cal(static_cast<std::size_t>(n_cal));
      for (int i = 0; i < n_cal; ++i) cal[i] = scores[idx[i]];
      std::sort(cal.begin(), cal.end());
      const double qs = k_split > n_cal ? kInf : cal[std::max(k_split, 1) - 1];
      const double qu = k_ucb > n_cal ? kInf : cal[k_ucb - 1];
      int hit_s = 0;
      int hit_u = 0;
      double sig = 0.0;
      for (int t = 0; t < n_test; ++t) {
        const int i = idx[static_cast<std::size_t>(n_cal + t)];
        hit_s += scores[i] <= qs;
        hit_u += scores[i] <= qu;
        sig += sigmas[i];
      }
      sig /= n_test;
      cov_s[rep] = static_cast<double>(hit_s) / n_test;
      cov_u[rep] = static_cast<double>(hit_u) / n_test;
      hw_s[rep] = std::isinf(qs) ? kInf : qs * sig;
      hw_u[rep] = std::isinf(qu) ? kInf : qu * sig;
    });

    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    rows.push_back({rho, ConformalMethod::kSplit, mean(cov_s), mean(hw_s), n_cal, cov_s});
    rows.push_back({rho, ConformalMethod::kUcb, mean(cov_u), mean(hw_u), n_cal, cov_u});
  }
  return rows;
}

void write_conformal_csv(std::ostream& os, const std::vector<CoverageRow>& rows) {
  io::CsvTable t({"rho", "method", "mean_coverage", "mean_halfwidth", "n_cal"});
  for (const auto& r : rows) {
    t.add_row({io::format_double(r.rho), to_string(r.method),
               io::format_double(r.mean_coverage), io::format_double(r.mean_halfwidth),
               std::to_string(r.n_cal)});
  }
  os << t.str();
}

double interface_eps_bar(const CalibrationResult& result, double sigma_max) {
  if (!(sigma_max > 0.0) || !std::isfinite(sigma_max)) {
    throw ScaleError("sigma_max must be finite and > 0");
  }
  if (!std::isfinite(result.q)) {
    throw NoCertificate("calibration with n_cal = " + std::to_string(result.n_cal) +
                        " gives an unbounded quantile; no interface bound");
  }
  return result.q * sigma_max;
}

std::vector<CalibrationSample> synthetic_dataset(int n, double noise,
                                                 std::uint64_t seed) {
  if (n < 1) throw ConfigError("synthetic dataset needs n >= 1");
  if (!(noise > 0.0)) throw ConfigError("synthetic noise must be > 0");
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<CalibrationSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * unit() - 1.0;
    // Box-Muller keeps the stream layout independent of the standard library.
    const double u1 = 1.0 - unit();
    const double u2 = unit();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    CalibrationSample s;
    s.features = Vector::Constant(1, x);
    s.prediction = x;
    s.target = x + noise * z;
    s.sigma = 1.0;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CalibrationSample> read_calibration_csv(
    const std::filesystem::path& path, const std::vector<std::string>& feature_columns,
    const std::string& target_column, const std::string& prediction_column,
    const std::string& sigma_column) {
  const io::CsvTable t = io::read_csv(path);
  auto column = [&](const std::string& name) {
    const auto& h = t.header();
    const auto it = std::find(h.begin(), h.end(), name);
    if (it == h.end()) {
      throw ConfigError("column '" + name + "' missing from " + path.string());
    }
    return static_cast<std::size_t>(it - h.begin());
  };
  std::vector<std::size_t> fc;
  for (const auto& f : feature_columns) fc.push_back(column(f));
  const std::size_t tc = column(target_column);
  const std::size_t pc = column(prediction_column);
  const bool has_sigma = !sigma_column.empty();
  const std::size_t sc = has_sigma ? column(sigma_column) : 0;
  auto num = [&](const std::string& cell) {
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("non-numeric cell '" + cell + "' in " + path.string());
    }
  };
  std::vector<CalibrationSample> out;
  for (const auto& row : t.rows()) {
    CalibrationSample s;
    s.features.resize(static_cast<Eigen::Index>(fc.size()));
    for (std::size_t i = 0; i < fc.size(); ++i) {
      s.features[static_cast<Eigen::Index>(i)] = num(row[fc[i]]);
    }
    s.target = num(row[tc]);
    s.prediction = num(row[pc]);
    s.sigma = has_sigma ? num(row[sc]) : 1.0;
    nonconformity(s);
    out.push_back(std::move(s));
  }
  return out;
}

void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationSample>& data) {
  if (data.empty()) throw ContractViolation("no calibration samples to write");
  std::vector<std::string> header;
  const auto nf = data.front().features.size();
  for (Eigen::Index i = 0; i < nf; ++i) header.push_back("chi" + std::to_string(i + 1));
  header.insert(header.end(), {"target", "prediction", "sigma"});
  io::CsvTable t(header);
  for (const auto& s : data) {
    if (s.features.size() != nf) throw DimensionError("feature sizes differ");
    std::vector<std::string> cells;
    for (Eigen::Index i = 0; i < nf; ++i) cells.push_back(io::format_double(s.features[i]));
    cells.push_back(io::format_double(s.target));
    cells.push_back(io::format_double(s.prediction));
    cells.push_back(io::format_double(s.sigma));
    t.add_row(std::move(cells));
  }
  t.write(path);
}

}  // namespace surrovv
