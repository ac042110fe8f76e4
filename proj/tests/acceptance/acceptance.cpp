// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: acceptance [work_dir]

#include "surrovv/bounds.hpp"
#include "surrovv/conformal.hpp"
#include "surrovv/errors.hpp"
#include "surrovv/harness.hpp"
#include "surrovv/novelty.hpp"
#include "surrovv/sampling.hpp"
#include "surrovv/smib.hpp"
#include "surrovv/surrogate.hpp"
#include "surrovv/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace surrovv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

SmibConfig benchmark_smib(double x_line) {
  SmibConfig cfg;
  cfg.machine = smib_benchmark_machine();
  cfg.X_line = x_line;
  cfg.grid = TimeGrid::over(8.0, 0.01);
  return cfg;
}

SmibConfig sm2_task() {
  SmibConfig cfg = benchmark_smib(0.2);
  cfg.machine.dP_m = 0.0;
  return cfg;
}

// Verification box for the SM2 task, over [delta, omega, P_m0].
OperatingBox wide_box() {
  return {(Vector(3) << 0.0, -1.0, 0.4).finished(), (Vector(3) << 0.8, 1.0, 1.0).finished()};
}

// Training box: a neighbourhood of nominal operation inside the wide box.
OperatingBox nominal_box() {
  return {(Vector(3) << 0.1, -0.5, 0.55).finished(), (Vector(3) << 0.6, 0.5, 0.85).finished()};
}

constexpr double kTmax = 0.2;

// Trained once, shared by criteria 6, 7 and 8.
const MlpSurrogate& trained_sm2() {
  static const MlpSurrogate net = [] {
    const auto field = smib_field(sm2_task());
    const OperatingBox box = nominal_box();
    const auto set = make_training_set(field, box, kTmax, 2000, 200, 200, 11);
    MlpSurrogate n(2, 1);
    n.initialize(12);
    n.normalization() = InputNormalization::fit(
        OperatingBox((Vector(4) << box.lo, 0.0).finished(), (Vector(4) << box.hi, kTmax).finished()));
    n.set_t_max(kTmax);
    TrainOptions o;
    o.max_iters = 300;
    Stopwatch sw;
    auto r = train(n, set, field, o);
    std::cout << "  (trained SM2 surrogate: loss " << fmt(r.loss_history.back()) << " after "
              << r.loss_history.size() - 1 << " iterations, " << fmt(sw.seconds(), 3) << " s)\n";
    r.net.set_t_max(kTmax);
    return r.net;
  }();
  return net;
}

Disturbance benchmark_disturbance() {
  Disturbance d;
  d.epsilon = 0.02;
  d.t_on = 1.2;
  d.t_off = 3.0;
  d.w = 0.03;
  d.phi = 0.7;
  return d;
}

const std::vector<double> kSweep{0.1, 0.2, 0.3, 0.4, 0.5};

// ---------------------------------------------------------------------------

Outcome c1_budget_fidelity() {
  const SmibConfig cfg = benchmark_smib(0.2);
  Disturbance d = benchmark_disturbance();
  Stopwatch sw;
  d.amplitude = calibrate_amplitude(cfg, d, d.epsilon);
  const auto r = perturbation_run(cfg, d);
  const double s = sw.seconds();
  const bool in_range = r.max_e_z >= 0.0196 && r.max_e_z <= 0.0204;
  return {in_range && s < 1.0, "max e_z = " + fmt(r.max_e_z) + ", runtime " + fmt(s, 3) + " s"};
}

Outcome c2_monotone() {
  const auto rows = xline_sweep(benchmark_smib(0.2), benchmark_disturbance(), 0.02, kSweep);
  bool ok = true;
  std::string vals;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].max_e_sim < rows[i - 1].max_e_sim) ok = false;
    vals += (i ? " " : "") + fmt(rows[i].max_e_sim, 4);
  }
  const double ratio = rows.back().max_e_sim / rows.front().max_e_sim;
  return {ok, "max e_sim [" + vals + "], ratio X_line " + fmt(kSweep.back(), 2) + "/" +
                  fmt(kSweep.front(), 2) + " = " + fmt(ratio, 4)};
}

Outcome c3_theorem_validity() {
  const OperatingBox box((Vector(5) << 0.3, -0.05, -0.5, -1.5, 0.6).finished(),
                         (Vector(5) << 1.2, 0.05, 1.5, 0.5, 0.8).finished());
  const Disturbance d0 = benchmark_disturbance();
  bool ok = true;
  double worst_ratio = 0.0;
  double worst_pointwise = 0.0;
  for (double x : kSweep) {
    const SmibConfig cfg = benchmark_smib(x);
    Disturbance d = d0;
    d.amplitude = calibrate_amplitude(cfg, d, d.epsilon);
    const auto r = perturbation_run(cfg, d);
    const auto est = estimate_constants(smib_coupled_system(cfg, SmibCouplingForm::kNetworkSide),
                                        box, 200, 1e-6, cfg.grid.horizon());
    const auto& c = est.constants;
    const double eps = r.max_e_z;
    const double ex_bound = c.L_y * c.K_yz * phi(c.T, c.alpha()) * eps;
    const double ey_bound = c.K_yx * ex_bound + c.K_yz * eps;
    const double ex_meas = r.e_x.maxCoeff();
    const double ey_meas = r.e_y[r.e_y.size() - 1];
    ok = ok && ex_meas <= ex_bound && ey_meas <= ey_bound;
    worst_ratio = std::max({worst_ratio, ex_meas / ex_bound, ey_meas / ey_bound});
    for (Eigen::Index k = 0; k < r.e_y.size(); ++k) {
      worst_pointwise = std::max(worst_pointwise, std::abs(r.e_y[k] - x * r.e_z[k]));
    }
  }
  ok = ok && worst_pointwise <= 1e-12;
  return {ok, "worst measured/bound " + fmt(worst_ratio, 4) + ", max |e_y - X_line e_z| " +
                  fmt(worst_pointwise, 3)};
}

Outcome c4_bound_algebra() {
  bool ok = phi(8.0, 0.0) == 8.0;
  // Near alpha = 0 the value must join the limit 8 and track expm1(aT)/a.
  double cont = 0.0;
  for (double a : {1e-15, -1e-15, 1e-14, -1e-14}) cont = std::max(cont, std::abs(phi(8.0, a) - 8.0));
  for (double a = 1e-12; a <= 1e-2; a *= 3.0) {
    for (double s : {a, -a}) {
      cont = std::max(cont, std::abs(phi(8.0, s) - std::expm1(8.0 * s) / s) / 8.0);
    }
  }
  ok = ok && cont <= 1e-12;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  double rt = 0.0;
  double hom = 0.0;
  for (int i = 0; i < 200; ++i) {
    BoundConstants c;
    c.K_yz = u(rng);
    c.K_yx = u(rng);
    c.L_y = u(rng);
    c.mu_cl = u(rng) - 1.0;
    c.T = 4.0 * u(rng);
    const double Delta = 0.1 * u(rng);
    rt = std::max(rt, std::abs(theorem_bounds(c, eps_max(c, Delta)).total - Delta) / Delta);
    const double e = 0.01 * u(rng);
    const auto b1 = theorem_bounds(c, e);
    const auto b3 = theorem_bounds(c, 3.0 * e);
    hom = std::max({hom, std::abs(b3.ex - 3.0 * b1.ex) / b3.ex, std::abs(b3.ey - 3.0 * b1.ey) / b3.ey});
  }
  ok = ok && rt <= 1e-12 && hom <= 1e-14;
  return {ok, "continuity gap " + fmt(cont, 3) + ", round-trip " + fmt(rt, 3) + ", homogeneity " +
                  fmt(hom, 3)};
}

Outcome c5_gradients() {
  Stopwatch sw;
  const auto field = smib_field(benchmark_smib(0.2));
  const TimeGrid grid = TimeGrid::over(1.0, 0.01);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_adj = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x0 = (Vector(2) << 0.1 + 0.6 * u(rng), -0.5 + u(rng)).finished();
    const Vector p = Vector::Constant(1, 0.5 + 0.4 * u(rng));
    const Vector c = (Vector(2) << u(rng), u(rng) - 0.5).finished();
    TrajectoryFunctional J;
    J.value = [&](const Trajectory& t) {
      return 0.5 * (t.states.rowwise() - c.transpose()).rowwise().squaredNorm().sum() * grid.dt;
    };
    J.row_gradient = [&](const Trajectory& t) {
      return Matrix((t.states.rowwise() - c.transpose()) * grid.dt);
    };
    const auto a = adjoint_gradient(field, x0, p, grid, J);
    Vector g(3), fd(3);
    g << a.d_x0, a.d_params;
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      Vector xp = x0, xm = x0, pp = p, pm = p;
      if (i < 2) {
        xp[i] += h;
        xm[i] -= h;
      } else {
        pp[0] += h;
        pm[0] -= h;
      }
      fd[i] = (J.value(integrate_rk4(field, xp, pp, grid)) - J.value(integrate_rk4(field, xm, pm, grid))) /
              (2 * h);
    }
    worst_adj = std::max(worst_adj, (g - fd).norm() / fd.norm());
  }

  const auto sm2 = smib_field(sm2_task());
  double worst_net = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MlpSurrogate net(2, 1, {8, 8});
    net.initialize(100 + static_cast<std::uint64_t>(trial));
    for (auto& b : net.biases()) b = 0.1 * Vector::Random(b.size());
    const OperatingBox box = nominal_box();
    net.normalization() = InputNormalization::fit(
        OperatingBox((Vector(4) << box.lo, 0.0).finished(), (Vector(4) << box.hi, kTmax).finished()));
    const auto set = make_training_set(sm2, box, kTmax, 20, 10, 10, 200 + static_cast<std::uint64_t>(trial));
    const auto lg = grad_params(net, set, sm2);
    const Vector theta = net.flat_parameters();
    Vector fd(theta.size());
    MlpSurrogate probe = net;
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vector a = theta, b = theta;
      a[i] += h;
      b[i] -= h;
      probe.set_flat_parameters(a);
      const double fa = loss_only(probe, set, sm2).total;
      probe.set_flat_parameters(b);
      const double fb = loss_only(probe, set, sm2).total;
      fd[i] = (fa - fb) / (2 * h);
    }
    worst_net = std::max(worst_net, (lg.gradient - fd).norm() / fd.norm());
  }
  const double s = sw.seconds();
  return {worst_adj < 1e-5 && worst_net < 1e-4 && s < 10.0,
          "adjoint rel err " + fmt(worst_adj, 3) + ", network rel err " + fmt(worst_net, 3) +
              ", runtime " + fmt(s, 3) + " s"};
}

SearchObjective sm2_objective() {
  return make_discrepancy_objective(std::make_shared<MlpTrajectoryModel>(trained_sm2()),
                                    smib_field(sm2_task()), TimeGrid::over(1.0, 0.01));
}

Outcome c6_dominance() {
  const SearchObjective obj = sm2_objective();
  const OperatingBox box = wide_box();
  const SearchBudget budget{10, 100};
  int losses = 0;
  bool honest = true;
  double min_margin = INFINITY;
  std::string loser;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const std::uint64_t seed = derive_seed(1, i);
    const auto run = [&](const std::string& m) {
      CountingObjective counter(obj);
      const SearchObjective counted = [&counter](const Vector& e, bool g) { return counter(e, g); };
      SearchResult r;
      if (m == "random") r = random_search(counted, box, budget, seed);
      else if (m == "blackbox") r = blackbox_search(counted, box, budget, seed);
      else r = pgd_search(counted, box, budget, parse_inner_method(m), 0.1, seed);
      honest = honest && counter.count() <= budget.total_evals && r.eval_count == counter.count();
      return r.best_value;
    };
    const double base = run("random");
    for (const char* m : {"pgd", "adam", "sgd", "lbfgs", "blackbox"}) {
      const double v = run(m);
      min_margin = std::min(min_margin, v - base);
      if (v < base) {
        ++losses;
        loser += std::string(loser.empty() ? "" : ",") + m + "@" + std::to_string(i);
      }
    }
  }
  return {losses == 0 && honest,
          std::to_string(losses) + " of 50 paired runs below random (min margin " +
              fmt(min_margin, 3) + (loser.empty() ? "" : "; " + loser) + "), budgets " +
              (honest ? "honored" : "EXCEEDED")};
}

Outcome c7_box_shrink() {
  const SearchObjective obj = sm2_objective();
  std::uint64_t call = 0;
  const BoxSearcher search = [&](const OperatingBox& b, const std::optional<Vector>& warm) {
    return pgd_search(obj, b, SearchBudget{10, 100}, InnerMethod::kPgd, 0.1, derive_seed(2, call++),
                      warm);
  };
  const auto rows = box_shrink_study(search, wide_box(), {1.0, 0.75, 0.5, 0.25});
  bool ok = true;
  std::string vals;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].normalized_max_error > rows[i - 1].normalized_max_error) ok = false;
    vals += (i ? " " : "") + fmt(rows[i].normalized_max_error, 4);
  }
  ok = ok && rows.back().width_fraction == 0.25 && rows.back().normalized_max_error < rows.front().normalized_max_error;
  return {ok, "normalized max error at widths 1/.75/.5/.25: " + vals};
}

Outcome c8_dissociation() {
  const MlpSurrogate& net = trained_sm2();
  const auto field = smib_field(sm2_task());
  const TimeGrid grid = TimeGrid::over(4.0, 0.01);
  const Vector x0 = (Vector(2) << 0.5, 0.1).finished();
  const Vector u = Vector::Constant(1, 0.7);
  const Trajectory sur = surrogate_trajectory(net, x0, u, grid);
  const Trajectory ref = integrate_rk4(field, x0, u, grid);
  const Vector fe = functional_error(sur, surrogate_time_derivative(net, x0, u, grid), field, u);
  const Vector se = solution_error(sur, ref);
  const int first_hop = static_cast<int>(std::lround(kTmax / grid.dt));
  const double early = se.head(first_hop + 1).maxCoeff();
  const double final = se[se.size() - 1];
  const double max_fe = fe.maxCoeff();
  return {max_fe < 0.05 && final >= 10.0 * early,
          "max functional error " + fmt(max_fe, 4) + ", solution error first window " + fmt(early, 3) +
              " -> final " + fmt(final, 3) + " (" + fmt(final / early, 3) + "x)"};
}

Outcome c9_conformal() {
  Stopwatch sw;
  const auto data = synthetic_dataset(2000, 0.1, 21);
  CoverageOptions o;
  o.alpha = 0.05;
  o.delta = 0.05;
  o.n_repeats = 1000;
  o.seed = 22;
  const auto rows = coverage_experiment(data, {0.0095, 0.05, 0.1, 0.5}, o);
  // Exact central 95% band of Binomial(1000, 0.95) / 1000.
  int klo = 0;
  while (binomial_cdf(klo, 1000, 0.95) < 0.025) ++klo;
  int khi = klo;
  while (binomial_cdf(khi, 1000, 0.95) < 0.975) ++khi;
  const double lo = klo / 1000.0, hi = khi / 1000.0;
  bool ok = true;
  std::string split_cov;
  const CoverageRow* scarce_split = nullptr;
  const CoverageRow* scarce_ucb = nullptr;
  for (const auto& r : rows) {
    if (r.n_cal <= 19) (r.method == ConformalMethod::kSplit ? scarce_split : scarce_ucb) = &r;
    if (r.method == ConformalMethod::kSplit && r.n_cal >= 99) {
      ok = ok && r.mean_coverage >= lo && r.mean_coverage <= hi;
      split_cov += (split_cov.empty() ? "" : " ") + fmt(r.mean_coverage, 4);
    }
  }
  ok = ok && scarce_split && scarce_ucb &&
       scarce_ucb->mean_coverage >= scarce_split->mean_coverage &&
       scarce_ucb->mean_halfwidth >= scarce_split->mean_halfwidth;
  const double s = sw.seconds();
  ok = ok && s < 30.0;
  std::string detail = "split coverage [" + split_cov + "] in [" + fmt(lo, 4) + ", " + fmt(hi, 4) + "]";
  if (scarce_split && scarce_ucb) {
    detail += "; n_cal " + std::to_string(scarce_split->n_cal) + ": split " +
              fmt(scarce_split->mean_coverage, 4) + "/" + fmt(scarce_split->mean_halfwidth, 4) +
              ", ucb " + fmt(scarce_ucb->mean_coverage, 4) + "/" + fmt(scarce_ucb->mean_halfwidth, 4);
  }
  return {ok, detail + ", runtime " + fmt(s, 3) + " s"};
}

Trajectory constant_traj(const Vector& v) {
  Trajectory t;
  t.grid = {0.0, 0.1, 9};
  t.states = v.transpose().replicate(10, 1);
  return t;
}

Outcome c10_novelty() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> size(1, 12);
  int sandwich = 0;
  for (int trial = 0; trial < 100; ++trial) {
    TrajectoryArchive arch;
    arch.beta = 0.1 + std::abs(u(rng)) * 5;
    const int k = size(rng);
    const Trajectory cand = constant_traj((Vector(2) << u(rng), u(rng)).finished());
    double dmin = INFINITY;
    for (int i = 0; i < k; ++i) {
      Trajectory m = constant_traj((Vector(2) << u(rng), u(rng)).finished());
      dmin = std::min(dmin, std::pow(traj_distance(cand, m), 2));
      arch.add(m);
    }
    const double n = novelty_score(cand, arch);
    sandwich += n <= dmin + 1e-12 && n >= dmin - std::log(double(k)) / arch.beta - 1e-12;
  }

  const TrajectoryGenerator two = [](const Vector& e) {
    return constant_traj(Vector::Constant(1, (e[0] < 0.5 ? 5.0 : -5.0) + 0.1 * e[0]));
  };
  const OperatingBox unit1(Vector::Zero(1), Vector::Ones(1));
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = novelty_sample(two, unit1, 25, 8, 1.0, seed);
    bool hi = false, lo = false;
    for (const auto& m : r.archive.members) {
      hi |= m.states(0, 0) > 0.0;
      lo |= m.states(0, 0) < 0.0;
    }
    covered += r.archive.size() == 4 && hi && lo;
  }

  const TrajectoryGenerator ident = [](const Vector& e) { return constant_traj(e); };
  const OperatingBox unit2(Vector::Zero(2), Vector::Ones(2));
  bool equal = true;
  for (int budget : {1, 2, 9, 25, 64}) {
    const auto a = novelty_sample(ident, unit2, budget, 8, 1.0, 3);
    const auto b = naive_sample(ident, unit2, budget, 8, 1.0, 3);
    equal = equal && a.evals == budget && b.evals == budget && a.archive.size() == b.archive.size();
  }
  return {sandwich == 100 && covered >= 18 && equal,
          "sandwich " + std::to_string(sandwich) + "/100, two-cluster coverage " +
              std::to_string(covered) + "/20, equal budgets " + (equal ? "yes" : "no")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c11_determinism(const fs::path& work) {
  const json box3{{"lo", {0.1, -0.5, 0.55}}, {"hi", {0.6, 0.5, 0.85}}};
  const json small_surrogate{{"hidden", {8, 8}}, {"t_max", kTmax}};
  const json small_training{{"max_iters", 20}, {"n_r", 100}, {"n_d", 20}, {"n_0", 20}, {"box", box3}};
  const json small_verify{{"box", box3}, {"T", 0.4}, {"restarts", 2}, {"total_evals", 10}, {"seeds", 2}};
  const std::vector<std::pair<std::string, json>> configs{
      {"smib-demo", {{"experiment", "smib-demo"}, {"seed", 1}, {"smib", {{"X_line", 0.2}}}}},
      {"xline-sweep", {{"experiment", "xline-sweep"}, {"seed", 1}, {"sweep", {{"x_line", {0.1, 0.3}}}}}},
      {"bound-report",
       {{"experiment", "bound-report"},
        {"seed", 1},
        {"smib", {{"X_line", 0.2}}},
        {"bound",
         {{"Delta", 0.05},
          {"n_samples", 50},
          {"box", {{"lo", {0.3, -0.05, -0.5, -1.5, 0.6}}, {"hi", {1.2, 0.05, 1.5, 0.5, 0.8}}}}}}}},
      {"train",
       {{"experiment", "train"},
        {"seed", 3},
        {"smib", {{"X_line", 0.2}}},
        {"machine", {{"dP_m", 0.0}}},
        {"surrogate", small_surrogate},
        {"training", small_training}}},
      {"verify",
       {{"experiment", "verify"},
        {"seed", 3},
        {"smib", {{"X_line", 0.2}}},
        {"machine", {{"dP_m", 0.0}}},
        {"surrogate", small_surrogate},
        {"training", small_training},
        {"verify", small_verify}}},
      {"box-shrink",
       {{"experiment", "box-shrink"},
        {"seed", 3},
        {"smib", {{"X_line", 0.2}}},
        {"machine", {{"dP_m", 0.0}}},
        {"surrogate", small_surrogate},
        {"training", small_training},
        {"verify", small_verify}}},
      {"novelty",
       {{"experiment", "novelty"},
        {"seed", 3},
        {"smib", {{"X_line", 0.2}}},
        {"machine", {{"dP_m", 0.0}}},
        {"surrogate", small_surrogate},
        {"training", small_training},
        {"novelty", {{"beta", 1.0}, {"budget", 12}, {"seeds", 2}, {"box", box3}, {"T", 0.4}}}}},
      {"calibrate",
       {{"experiment", "calibrate"},
        {"seed", 3},
        {"conformal",
         {{"delta", 0.05}, {"sigma", 1.0}, {"n_repeats", 50}, {"dataset", {{"n", 400}}}}}}},
  };
  int compared = 0;
  std::string bad;
  for (const auto& [name, cfg] : configs) {
    const fs::path dir = work / "determinism" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "config.json";
    std::ofstream(cfg_path) << cfg.dump(2);
    std::ostringstream diag;
    for (const char* run : {"a", "b"}) {
      harness::Overrides o;
      o.output_dir = dir / run;
      const int rc = harness::run(cfg_path, o, diag);
      if (rc != 0) return {false, name + " exited " + std::to_string(rc) + ": " + diag.str()};
    }
    int here = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      if (e.path().extension() != ".csv") continue;
      ++here;
      ++compared;
      if (slurp(e.path()) != slurp(dir / "b" / e.path().filename())) {
        bad += " " + name + "/" + e.path().filename().string();
      }
    }
    if (here == 0) bad += " " + name + "(no csv)";
  }
  return {bad.empty(), std::to_string(compared) + " csv files over " + std::to_string(configs.size()) +
                           " experiments" + (bad.empty() ? " identical" : "; differ:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "surrovv_acceptance";
  fs::create_directories(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"SMIB budget fidelity", c1_budget_fidelity},
      {"SMIB monotone amplification", c2_monotone},
      {"bound empirical validity", c3_theorem_validity},
      {"bound algebra", c4_bound_algebra},
      {"gradient exactness", c5_gradients},
      {"search dominance", c6_dominance},
      {"box-shrink trend", c7_box_shrink},
      {"residual/solution dissociation", c8_dissociation},
      {"conformal coverage", c9_conformal},
      {"novelty properties", c10_novelty},
      {"determinism", [&] { return c11_determinism(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "[PRIMARY] criterion " << i + 1 << " " << criteria[i].first << ": "
              << (o.pass ? "PASS" : "FAIL") << "  (" << o.detail << ")" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
