#include "surrovv/harness.hpp"

#include "surrovv/bounds.hpp"
#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"
#include "surrovv/novelty.hpp"
#include "surrovv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace surrovv::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, ExperimentKind>>& kinds() {
  static const std::vector<std::pair<std::string, ExperimentKind>> k{
      {"smib-demo", ExperimentKind::kSmibDemo},
      {"xline-sweep", ExperimentKind::kXlineSweep},
      {"train", ExperimentKind::kTrain},
      {"verify", ExperimentKind::kVerify},
      {"box-shrink", ExperimentKind::kBoxShrink},
      {"novelty", ExperimentKind::kNovelty},
      {"calibrate", ExperimentKind::kCalibrate},
      {"bound-report", ExperimentKind::kBoundReport},
  };
  return k;
}

}  // namespace

ExperimentKind parse_experiment(const std::string& name) {
  for (const auto& [n, k] : kinds()) {
    if (n == name) return k;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

std::string to_string(ExperimentKind k) {
  for (const auto& [n, kk] : kinds()) {
    if (kk == k) return n;
  }
  return "?";
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, k] : kinds()) v.push_back(n);
    return v;
  }();
  return names;
}

// ---------------------------------------------------------------------------
// Strict config reader

namespace {

// Reads one JSON object, recording every value (defaults included) into
// `out` and rejecting keys that were never asked for.
class Section {
 public:
  Section(const json* j, std::string name, json* out)
      : j_(j), name_(std::move(name)), out_(out) {
    if (j_ && !j_->is_object()) throw ConfigError(name_ + " must be an object");
    if (out_->is_null()) *out_ = json::object();
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  double number(const std::string& key, std::optional<double> def = std::nullopt,
                const char* why = nullptr) {
    const json* v = fetch(key);
    double r = 0.0;
    if (!v) {
      if (!def) missing(key, why);
      r = *def;
    } else {
      if (!v->is_number()) bad(key, "a number");
      r = v->get<double>();
      if (!std::isfinite(r)) bad(key, "finite");
    }
    (*out_)[key] = r;
    return r;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  int integer(const std::string& key, std::optional<int> def = std::nullopt) {
    const json* v = fetch(key);
    int r = 0;
    if (!v) {
      if (!def) missing(key);
      r = *def;
    } else {
      if (!v->is_number_integer()) bad(key, "an integer");
      r = v->get<int>();
    }
    (*out_)[key] = r;
    return r;
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    const json* v = fetch(key);
    std::uint64_t r = def;
    if (v) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        bad(key, "a non-negative integer");
      }
      r = v->get<std::uint64_t>();
    }
    (*out_)[key] = r;
    return r;
  }

  std::string str(const std::string& key, std::optional<std::string> def = std::nullopt) {
    const json* v = fetch(key);
    std::string r;
    if (!v) {
      if (!def) missing(key);
      r = *def;
    } else {
      if (!v->is_string()) bad(key, "a string");
      r = v->get<std::string>();
    }
    (*out_)[key] = r;
    return r;
  }

  std::vector<double> numbers(const std::string& key,
                              std::optional<std::vector<double>> def = std::nullopt,
                              const char* why = nullptr) {
    const json* v = fetch(key);
    std::vector<double> r;
    if (!v) {
      if (!def) missing(key, why);
      r = *def;
    } else {
      if (!v->is_array()) bad(key, "an array of numbers");
      for (const auto& e : *v) {
        if (!e.is_number()) bad(key, "an array of numbers");
        r.push_back(e.get<double>());
        if (!std::isfinite(r.back())) bad(key, "finite");
      }
    }
    (*out_)[key] = r;
    return r;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> def) {
    const json* v = fetch(key);
    std::vector<int> r = def;
    if (v) {
      r.clear();
      if (!v->is_array()) bad(key, "an array of integers");
      for (const auto& e : *v) {
        if (!e.is_number_integer()) bad(key, "an array of integers");
        r.push_back(e.get<int>());
      }
    }
    (*out_)[key] = r;
    return r;
  }

  std::vector<std::string> strings(const std::string& key,
                                   std::optional<std::vector<std::string>> def) {
    const json* v = fetch(key);
    std::vector<std::string> r;
    if (!v) {
      if (!def) missing(key);
      r = *def;
    } else {
      if (!v->is_array()) bad(key, "an array of strings");
      for (const auto& e : *v) {
        if (!e.is_string()) bad(key, "an array of strings");
        r.push_back(e.get<std::string>());
      }
    }
    (*out_)[key] = r;
    return r;
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    const json* v = has(key) ? &j_->at(key) : nullptr;
    return Section(v, name_ + "." + key, &(*out_)[key]);
  }

  OperatingBox box(const std::string& key) {
    if (!has(key)) missing(key);
    Section b = sub(key);
    const auto lo = b.numbers("lo");
    const auto hi = b.numbers("hi");
    b.finish();
    if (lo.size() != hi.size() || lo.empty()) {
      throw ConfigError(name_ + "." + key + " needs lo/hi of equal nonzero length");
    }
    OperatingBox ob(Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                    Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size())));
    try {
      ob.validate();
    } catch (const Error& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
    return ob;
  }

  std::optional<OperatingBox> optional_box(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return box(key);
  }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + name_ + "." + k);
    }
  }

  const std::string& name() const { return name_; }

 private:
  const json* fetch(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return nullptr;
    return &j_->at(key);
  }
  [[noreturn]] void missing(const std::string& key, const char* why = nullptr) const {
    std::string msg = name_ + "." + key + " is required";
    if (why) msg += std::string(": ") + why;
    throw ConfigError(msg);
  }
  [[noreturn]] void bad(const std::string& key, const char* what) const {
    throw ConfigError(name_ + "." + key + " must be " + what);
  }

  const json* j_;
  std::string name_;
  json* out_;
  std::set<std::string> seen_;
};

fs::path resolve_path(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void rethrow_as_config(const std::string& where, const std::exception& e) {
  throw ConfigError(where + ": " + e.what());
}

int model_states(const std::string& model) { return model == "sm4" ? 4 : 2; }

void require_dim(const OperatingBox& b, int dim, const std::string& what) {
  if (b.dim() != dim) {
    throw ConfigError(what + " has " + std::to_string(b.dim()) + " dimensions, expected " +
                      std::to_string(dim));
  }
}

bool needs_surrogate(ExperimentKind k) {
  return k == ExperimentKind::kTrain || k == ExperimentKind::kVerify ||
         k == ExperimentKind::kBoxShrink || k == ExperimentKind::kNovelty;
}

}  // namespace

ExperimentConfig parse_config(const json& j, const Overrides& ov, const fs::path& base_dir) {
  ExperimentConfig cfg;
  json resolved = json::object();
  Section top(&j, "config", &resolved);

  std::string exp = top.has("experiment") ? top.str("experiment") : std::string();
  if (ov.experiment) {
    if (!exp.empty() && exp != *ov.experiment) {
      throw ConfigError("config declares experiment '" + exp + "' but '" + *ov.experiment +
                        "' was requested");
    }
    exp = *ov.experiment;
    resolved["experiment"] = exp;
  }
  if (exp.empty()) throw ConfigError("config.experiment is required");
  cfg.kind = parse_experiment(exp);

  cfg.model = top.str("model", std::string("sm2"));
  if (cfg.model == "custom") {
    throw ConfigError("model 'custom' is available through the library API only");
  }
  if (cfg.model != "sm2" && cfg.model != "sm4") {
    throw ConfigError("config.model must be sm2, sm4 or custom");
  }
  cfg.seed = top.u64("seed", 0);
  if (ov.seed) {
    cfg.seed = *ov.seed;
    resolved["seed"] = cfg.seed;
  }
  cfg.output_dir = top.str("output_dir", std::string("surrovv_out"));
  if (ov.output_dir) {
    cfg.output_dir = *ov.output_dir;
    resolved["output_dir"] = cfg.output_dir.string();
  }

  const ExperimentKind k = cfg.kind;
  const bool playback = [&] {
    if (!j.contains("conformal") || !j["conformal"].is_object()) return false;
    const auto& c = j["conformal"];
    return c.contains("dataset") && c["dataset"].is_object() &&
           c["dataset"].value("source", std::string()) == "iq-playback";
  }();
  const bool uses_smib = k != ExperimentKind::kCalibrate || playback;
  const bool uses_surrogate = needs_surrogate(k) || (k == ExperimentKind::kCalibrate && playback);
  const int ns = model_states(cfg.model);

  // machine
  if (uses_smib || top.has("machine")) {
    Section m = top.sub("machine");
    const MachineParams b = smib_benchmark_machine();
    MachineParams& mp = cfg.smib.machine;
    mp.H = m.number("H", b.H);
    mp.D = m.number("D", b.D);
    mp.E_prime = m.number("E_prime", b.E_prime);
    mp.X_d_prime = m.number("X_d_prime", b.X_d_prime);
    mp.P_m0 = m.number("P_m0", b.P_m0);
    mp.dP_m = m.number("dP_m", b.dP_m);
    mp.t_step = m.number("t_step", b.t_step);
    mp.X_q_prime = m.optional_number("X_q_prime");
    mp.X_d = m.optional_number("X_d");
    mp.X_q = m.optional_number("X_q");
    mp.T_d0_prime = m.optional_number("T_d0_prime");
    mp.T_q0_prime = m.optional_number("T_q0_prime");
    mp.E_fd = m.optional_number("E_fd");
    m.finish();
    mp.validate();
    if (cfg.model == "sm4" && uses_smib) mp.require_sm4();
  }

  // smib
  if (uses_smib || top.has("smib")) {
    Section s = top.sub("smib");
    const auto v = s.numbers("V_inf", std::vector<double>{1.0, 0.0});
    if (v.size() != 2) throw ConfigError("smib.V_inf must be [re, im]");
    cfg.smib.V_inf = Complex(v[0], v[1]);
    const bool sweep = k == ExperimentKind::kXlineSweep;
    if (sweep && !s.has("X_line")) {
      cfg.smib.X_line = 0.0;
    } else {
      cfg.smib.X_line = s.number(
          "X_line", std::nullopt,
          "the line reactance has no default value and must be set explicitly");
    }
    const double T = s.number("T", 8.0);
    const double dt = s.number("dt", 0.01);
    cfg.smib.grid = TimeGrid::over(T, dt);
    const std::string inj = s.str("injection", std::string("pre-solve"));
    if (inj == "pre-solve") cfg.smib.injection = InjectionPoint::kPreSolve;
    else if (inj == "post-solve") cfg.smib.injection = InjectionPoint::kPostSolve;
    else throw ConfigError("smib.injection must be pre-solve or post-solve");
    s.finish();
    if (uses_smib) cfg.smib.validate();
  }

  // disturbance
  if (k == ExperimentKind::kSmibDemo || k == ExperimentKind::kXlineSweep ||
      k == ExperimentKind::kBoundReport || top.has("disturbance")) {
    Section d = top.sub("disturbance");
    Disturbance& ds = cfg.disturbance;
    ds.epsilon = d.number("epsilon", 0.02);
    ds.t_on = d.number("t_on", 1.2);
    ds.t_off = d.number("t_off", 3.0);
    ds.w = d.number("w", 0.03);
    ds.phi = d.number("phi", 0.7);
    d.finish();
    ds.validate();
    if (!(ds.epsilon > 0.0)) throw ConfigError("disturbance.epsilon must be > 0");
  }

  // sweep
  if (k == ExperimentKind::kXlineSweep || top.has("sweep")) {
    Section sw = top.sub("sweep");
    cfg.sweep = sw.numbers("x_line", std::nullopt,
                           "the swept line reactances have no default values");
    sw.finish();
    if (k == ExperimentKind::kXlineSweep) {
      if (cfg.sweep.empty()) throw ConfigError("sweep.x_line must not be empty");
      for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
        if (cfg.sweep[i] < 0.0) throw ConfigError("sweep.x_line values must be >= 0");
        if (i > 0 && !(cfg.sweep[i] > cfg.sweep[i - 1])) {
          throw ConfigError("sweep.x_line must be strictly ascending");
        }
      }
    }
  }

  // surrogate
  if (uses_surrogate || top.has("surrogate")) {
    Section s = top.sub("surrogate");
    cfg.surrogate.hidden = s.integers("hidden", {64, 64, 64});
    cfg.surrogate.t_max = s.number("t_max", 0.2);
    if (s.has("weights")) cfg.surrogate.weights = resolve_path(base_dir, s.str("weights"));
    s.finish();
    if (cfg.surrogate.hidden.empty()) throw ConfigError("surrogate.hidden must not be empty");
    for (int h : cfg.surrogate.hidden) {
      if (h < 1) throw ConfigError("surrogate.hidden widths must be >= 1");
    }
    if (!(cfg.surrogate.t_max > 0.0)) throw ConfigError("surrogate.t_max must be > 0");
  }

  // training
  const bool must_train = k == ExperimentKind::kTrain ||
                          (uses_surrogate && !cfg.surrogate.weights);
  if (must_train || top.has("training")) {
    Section t = top.sub("training");
    TrainingSection& tr = cfg.training;
    tr.present = true;
    const std::string opt = t.str("optimizer", std::string("lbfgs"));
    if (opt == "lbfgs") tr.options.optimizer = OptimizerKind::kLbfgs;
    else if (opt == "adam") tr.options.optimizer = OptimizerKind::kAdam;
    else throw ConfigError("training.optimizer must be lbfgs or adam");
    tr.options.max_iters = t.integer("max_iters", 500);
    tr.options.adam_lr = t.number("adam_lr", 1e-3);
    tr.options.lbfgs_history = t.integer("lbfgs_history", 10);
    tr.options.batch_size = t.integer("batch_size", 0);
    tr.options.loss_target = t.number("loss_target", 0.0);
    tr.n_r = t.integer("n_r", 2000);
    tr.n_d = t.integer("n_d", 200);
    tr.n_0 = t.integer("n_0", 200);
    tr.data_dt = t.number("data_dt", 1e-3);
    tr.box = t.box("box");
    t.finish();
    if (tr.options.max_iters < 0) throw ConfigError("training.max_iters must be >= 0");
    if (tr.options.lbfgs_history < 1) throw ConfigError("training.lbfgs_history must be >= 1");
    if (!(tr.options.adam_lr > 0.0)) throw ConfigError("training.adam_lr must be > 0");
    if (tr.options.batch_size < 0) throw ConfigError("training.batch_size must be >= 0");
    if (tr.n_r < 0 || tr.n_d < 0 || tr.n_0 < 0 || tr.n_r + tr.n_d + tr.n_0 < 1) {
      throw ConfigError("training point counts must be >= 0 with a positive total");
    }
    if (!(tr.data_dt > 0.0)) throw ConfigError("training.data_dt must be > 0");
    require_dim(tr.box, ns + 1, "training.box");
  }

  // verify
  const bool search = k == ExperimentKind::kVerify || k == ExperimentKind::kBoxShrink;
  if (search || top.has("verify")) {
    Section v = top.sub("verify");
    VerifySection& vs = cfg.verify;
    vs.box = v.optional_box("box");
    vs.T = v.number("T", 1.0);
    vs.dt = v.number("dt", 0.01);
    vs.budget.restarts = v.integer("restarts", 10);
    vs.budget.total_evals = v.integer("total_evals", 100);
    vs.methods = v.strings("methods", vs.methods);
    vs.step = v.number("step", 0.1);
    vs.n_seeds = v.integer("seeds", 10);
    vs.kappa = v.number("kappa", 1.0);
    v.finish();
    vs.budget.validate();
    TimeGrid::over(vs.T, vs.dt);
    if (!(vs.step > 0.0)) throw ConfigError("verify.step must be > 0");
    if (vs.n_seeds < 1) throw ConfigError("verify.seeds must be >= 1");
    if (!(vs.kappa >= 0.0)) throw ConfigError("verify.kappa must be >= 0");
    for (const auto& m : vs.methods) {
      if (m != "random" && m != "blackbox") parse_inner_method(m);
    }
    if (vs.box) require_dim(*vs.box, ns + 1, "verify.box");
    else if (search && !cfg.training.present) {
      throw ConfigError("verify.box is required when no training box is configured");
    }
  }

  // box_shrink
  if (k == ExperimentKind::kBoxShrink || top.has("box_shrink")) {
    Section b = top.sub("box_shrink");
    cfg.box_shrink.widths = b.numbers("widths", cfg.box_shrink.widths);
    cfg.box_shrink.method = b.str("method", std::string("pgd"));
    b.finish();
    if (cfg.box_shrink.method != "random" && cfg.box_shrink.method != "blackbox") {
      parse_inner_method(cfg.box_shrink.method);
    }
    const auto& w = cfg.box_shrink.widths;
    if (w.empty()) throw ConfigError("box_shrink.widths must not be empty");
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!(w[i] > 0.0 && w[i] <= 1.0)) throw ConfigError("box_shrink.widths must lie in (0, 1]");
      if (i > 0 && !(w[i] < w[i - 1])) {
        throw ConfigError("box_shrink.widths must be strictly descending");
      }
    }
  }

  // bound
  if (k == ExperimentKind::kBoundReport || top.has("bound")) {
    Section b = top.sub("bound");
    BoundSection& bs = cfg.bound;
    bs.present = true;
    bs.Delta = b.number("Delta", std::nullopt,
                        "the simulator-level tolerance has no default value");
    bs.eps = b.optional_number("eps");
    bs.n_samples = b.integer("n_samples", 200);
    bs.fd_step = b.number("fd_step", 1e-6);
    const std::string form = b.str("form", std::string("network-side"));
    if (form == "network-side") bs.form = SmibCouplingForm::kNetworkSide;
    else if (form == "machine-side") bs.form = SmibCouplingForm::kMachineSide;
    else throw ConfigError("bound.form must be network-side or machine-side");
    bs.box = b.box("box");
    bs.T = b.optional_number("T");
    b.finish();
    if (bs.n_samples < 1) throw ConfigError("bound.n_samples must be >= 1");
    if (!(bs.fd_step > 0.0)) throw ConfigError("bound.fd_step must be > 0");
    if (bs.eps && !(*bs.eps >= 0.0)) throw ConfigError("bound.eps must be >= 0");
    if (bs.T && !(*bs.T > 0.0)) throw ConfigError("bound.T must be > 0");
    require_dim(bs.box, 5, "bound.box");
    if (cfg.model != "sm2" && k == ExperimentKind::kBoundReport) {
      throw ConfigError("bound-report is defined for the sm2 SMIB model");
    }
  }

  // novelty
  if (k == ExperimentKind::kNovelty || top.has("novelty")) {
    Section n = top.sub("novelty");
    NoveltySection& nv = cfg.novelty;
    nv.present = true;
    nv.beta = n.number("beta", std::nullopt, "the soft-min sharpness has no default value");
    nv.budget = n.integer("budget", 64);
    nv.candidates_per_round = n.integer("candidates_per_round", 8);
    nv.n_seeds = n.integer("seeds", 10);
    nv.box = n.optional_box("box");
    nv.T = n.number("T", 1.0);
    nv.dt = n.number("dt", 0.01);
    n.finish();
    if (!(nv.beta > 0.0)) throw ConfigError("novelty.beta must be > 0");
    if (nv.budget < 1) throw ConfigError("novelty.budget must be >= 1");
    if (nv.candidates_per_round < 1) {
      throw ConfigError("novelty.candidates_per_round must be >= 1");
    }
    if (nv.n_seeds < 1) throw ConfigError("novelty.seeds must be >= 1");
    TimeGrid::over(nv.T, nv.dt);
    if (nv.box) require_dim(*nv.box, ns + 1, "novelty.box");
    else if (k == ExperimentKind::kNovelty && !cfg.training.present) {
      throw ConfigError("novelty.box is required when no training box is configured");
    }
  }

  // conformal
  if (k == ExperimentKind::kCalibrate || top.has("conformal")) {
    Section c = top.sub("conformal");
    ConformalSection& cs = cfg.conformal;
    cs.present = true;
    cs.alpha = c.number("alpha", 0.05);
    cs.delta = c.number("delta", std::nullopt,
                        "the UCB confidence level has no default value");
    cs.sigma = c.number("sigma", std::nullopt,
                        "the nonconformity scale has no default value");
    cs.sigma_max = c.optional_number("sigma_max");
    cs.rhos = c.numbers("rhos", cs.rhos);
    cs.n_repeats = c.integer("n_repeats", 1000);
    cs.max_test = c.integer("max_test", 0);
    Section d = c.sub("dataset");
    DatasetSection& ds = cs.dataset;
    ds.source = d.str("source", std::string("synthetic"));
    if (ds.source == "synthetic") {
      ds.n = d.integer("n", 2000);
      ds.noise = d.number("noise", 0.1);
      if (ds.n < 2) throw ConfigError("conformal.dataset.n must be >= 2");
      if (!(ds.noise > 0.0)) throw ConfigError("conformal.dataset.noise must be > 0");
    } else if (ds.source == "csv") {
      ds.path = resolve_path(base_dir, d.str("path"));
      ds.features = d.strings("features", std::vector<std::string>{});
      ds.target = d.str("target");
      ds.prediction = d.str("prediction");
      ds.sigma_column = d.str("sigma_column", std::string());
    } else if (ds.source == "iq-playback") {
      ds.n_trajectories = d.integer("n_trajectories", 40);
      ds.points_per_trajectory = d.integer("points_per_trajectory", 50);
      ds.box = d.optional_box("box");
      ds.T = d.number("T", 1.0);
      ds.dt = d.number("dt", 0.01);
      TimeGrid::over(ds.T, ds.dt);
      if (ds.n_trajectories < 1 || ds.points_per_trajectory < 1) {
        throw ConfigError("iq-playback needs positive trajectory and point counts");
      }
      if (cfg.model != "sm2") throw ConfigError("iq-playback is defined for the sm2 model");
      if (ds.box) require_dim(*ds.box, ns + 1, "conformal.dataset.box");
      else if (!cfg.training.present) {
        throw ConfigError("conformal.dataset.box is required when no training box is configured");
      }
    } else {
      throw ConfigError("conformal.dataset.source must be synthetic, csv or iq-playback");
    }
    d.finish();
    c.finish();
    if (!(cs.alpha > 0.0 && cs.alpha < 1.0)) throw ConfigError("conformal.alpha must lie in (0, 1)");
    if (!(cs.delta > 0.0 && cs.delta < 1.0)) throw ConfigError("conformal.delta must lie in (0, 1)");
    if (!(cs.sigma > 0.0)) throw ConfigError("conformal.sigma must be > 0");
    if (cs.sigma_max && !(*cs.sigma_max > 0.0)) throw ConfigError("conformal.sigma_max must be > 0");
    if (cs.rhos.empty()) throw ConfigError("conformal.rhos must not be empty");
    for (double r : cs.rhos) {
      if (!(r > 0.0 && r < 1.0)) throw ConfigError("conformal.rhos must lie in (0, 1)");
    }
    if (cs.n_repeats < 1) throw ConfigError("conformal.n_repeats must be >= 1");
    if (cs.max_test < 0) throw ConfigError("conformal.max_test must be >= 0");
  }

  top.finish();
  cfg.resolved = resolved;
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  try {
    return parse_config(j, overrides, path.parent_path());
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    rethrow_as_config("config " + path.string(), e);
  } catch (const Error& e) {
    rethrow_as_config("config " + path.string(), e);
  }
  return {};
}

VectorField model_field(const ExperimentConfig& cfg) {
  if (cfg.model == "sm4") {
    const auto& m = cfg.smib.machine;
    return sm4_field(m, sm4_infinite_bus(m, cfg.smib.V_inf, cfg.smib.X_line));
  }
  return smib_field(cfg.smib);
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_stream(const fs::path& path,
                  const std::function<void(std::ostream&)>& writer) {
  std::ostringstream os;
  writer(os);
  io::write_text(path, os.str());
}

OperatingBox extended_box(const OperatingBox& box, double t_max) {
  Vector lo(box.dim() + 1);
  Vector hi(box.dim() + 1);
  lo << box.lo, 0.0;
  hi << box.hi, t_max;
  return OperatingBox(lo, hi);
}

MlpSurrogate acquire_surrogate(const ExperimentConfig& cfg, const VectorField& field,
                               json& summary) {
  const int ns = field.n_state;
  if (cfg.surrogate.weights) {
    MlpSurrogate net = MlpSurrogate::load(*cfg.surrogate.weights);
    if (net.n_state() != ns || net.n_u() != 1) {
      throw ConfigError("weight file does not match the " + cfg.model + " model");
    }
    if (net.t_max() == 0.0) net.set_t_max(cfg.surrogate.t_max);
    summary["surrogate_source"] = "weights";
    return net;
  }
  const TrainingSection& tr = cfg.training;
  MlpSurrogate net(ns, 1, cfg.surrogate.hidden);
  net.initialize(derive_seed(cfg.seed, 1));
  net.normalization() = InputNormalization::fit(extended_box(tr.box, cfg.surrogate.t_max));
  net.set_t_max(cfg.surrogate.t_max);
  const TrainingSet set = make_training_set(field, tr.box, cfg.surrogate.t_max, tr.n_r,
                                            tr.n_d, tr.n_0, derive_seed(cfg.seed, 2),
                                            tr.data_dt);
  TrainOptions opt = tr.options;
  opt.seed = derive_seed(cfg.seed, 3);
  const TrainResult res = train(net, set, field, opt);

  res.net.save(cfg.output_dir / "weights.json");
  io::CsvTable hist({"iteration", "loss"});
  for (std::size_t i = 0; i < res.loss_history.size(); ++i) {
    hist.add_row({std::to_string(i), io::format_double(res.loss_history[i])});
  }
  hist.write(cfg.output_dir / "loss_history.csv");
  const LossBreakdown l = loss_only(res.net, set, field);
  json events = json::array();
  for (const auto& e : res.events) events.push_back({{"iteration", e.iteration}, {"what", e.what}});
  summary["training"] = {{"final_loss", l.total},
                         {"residual_loss", l.residual},
                         {"data_loss", l.data},
                         {"ic_loss", l.ic},
                         {"iterations", static_cast<int>(res.loss_history.size()) - 1},
                         {"events", events}};
  summary["surrogate_source"] = "trained";
  return res.net;
}

json run_smib_demo(const ExperimentConfig& cfg) {
  Disturbance d = cfg.disturbance;
  d.amplitude = calibrate_amplitude(cfg.smib, d, d.epsilon);
  const PerturbationRunResult r = perturbation_run(cfg.smib, d);
  write_perturbation_csv(cfg.output_dir / "perturbation.csv", r);
  return {{"X_line", cfg.smib.X_line},
          {"amplitude", r.amplitude},
          {"max_e_z", r.max_e_z},
          {"max_e_sim", r.max_e_sim},
          {"target_eps", d.epsilon}};
}

json run_xline_sweep(const ExperimentConfig& cfg) {
  const auto rows = xline_sweep(cfg.smib, cfg.disturbance, cfg.disturbance.epsilon, cfg.sweep);
  write_sweep_csv(cfg.output_dir / "sweep.csv", rows);
  json jr = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    jr.push_back({{"x_line", r.x_line},
                  {"amplitude", r.amplitude},
                  {"max_e_z", r.max_e_z},
                  {"max_e_sim", r.max_e_sim}});
    if (i > 0 && r.max_e_sim < rows[i - 1].max_e_sim) monotone = false;
  }
  json s{{"rows", jr}, {"max_e_sim_nondecreasing", monotone}};
  if (rows.size() >= 2 && rows.front().max_e_sim > 0.0) {
    s["max_e_sim_ratio_last_first"] = rows.back().max_e_sim / rows.front().max_e_sim;
  }
  return s;
}

json run_bound_report(const ExperimentConfig& cfg) {
  const BoundSection& b = cfg.bound;
  const CoupledSystem sys = smib_coupled_system(cfg.smib, b.form);
  const double T = b.T ? *b.T : cfg.smib.grid.horizon();
  const ConstantEstimate est = estimate_constants(sys, b.box, b.n_samples, b.fd_step, T);
  const double eps = b.eps ? *b.eps : cfg.disturbance.epsilon;
  json report = bound_report(est.constants, eps, b.Delta);
  report["n_samples"] = b.n_samples;
  report["n_skipped"] = est.n_skipped;
  io::write_text(cfg.output_dir / "bound_report.json", report.dump(2) + "\n");

  io::CsvTable t({"delta", "omega", "z_re", "z_im", "P_m0", "skipped", "K_yz", "K_yx",
                  "L_y", "mu_cl"});
  for (const auto& s : est.samples) {
    std::vector<std::string> cells;
    for (Eigen::Index i = 0; i < s.point.size(); ++i) cells.push_back(io::format_double(s.point[i]));
    cells.push_back(s.skipped ? "1" : "0");
    for (double v : {s.K_yz, s.K_yx, s.L_y, s.mu_cl}) cells.push_back(io::format_double(v));
    t.add_row(std::move(cells));
  }
  t.write(cfg.output_dir / "constants_samples.csv");
  return report;
}

SearchResult run_method(const std::string& method, const SearchObjective& obj,
                        const OperatingBox& box, const VerifySection& v,
                        std::uint64_t seed, const std::optional<Vector>& warm) {
  if (method == "random") return random_search(obj, box, v.budget, seed);
  if (method == "blackbox") return blackbox_search(obj, box, v.budget, seed, warm, v.kappa);
  return pgd_search(obj, box, v.budget, parse_inner_method(method), v.step, seed, warm);
}

const OperatingBox& pick_box(const std::optional<OperatingBox>& own,
                             const ExperimentConfig& cfg) {
  return own ? *own : cfg.training.box;
}

json run_verify(const ExperimentConfig& cfg, const MlpSurrogate& net,
                const VectorField& field) {
  const VerifySection& v = cfg.verify;
  const OperatingBox& box = pick_box(v.box, cfg);
  const SearchObjective obj = make_discrepancy_objective(
      std::make_shared<MlpTrajectoryModel>(net), field, TimeGrid::over(v.T, v.dt));

  std::vector<MethodRow> rows;
  std::map<std::string, std::vector<double>> best;
  std::map<std::string, int> diverged;
  for (int i = 0; i < v.n_seeds; ++i) {
    const std::uint64_t s = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i));
    for (const auto& m : v.methods) {
      CountingObjective counter(obj);
      const SearchObjective counted = [&counter](const Vector& e, bool g) {
        return counter(e, g);
      };
      const SearchResult r = run_method(m, counted, box, v, s, std::nullopt);
      if (counter.count() > v.budget.total_evals || r.eval_count != counter.count()) {
        throw ContractViolation("search method " + m + " exceeded its evaluation budget");
      }
      rows.push_back({m, s, r.best_value, counter.count()});
      best[m].push_back(r.best_value);
      diverged[m] += static_cast<int>(r.diverged.size());
    }
  }
  write_stream(cfg.output_dir / "methods_comparison.csv",
               [&](std::ostream& os) { write_methods_csv(os, rows); });
  json methods = json::object();
  for (const auto& [m, vals] : best) {
    double sum = 0.0;
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : vals) {
      sum += x;
      mx = std::max(mx, x);
    }
    json entry{{"mean_best_value", num_or_null(sum / static_cast<double>(vals.size()))},
               {"max_best_value", num_or_null(mx)},
               {"diverged_evaluations", diverged[m]}};
    if (best.count("random") && m != "random") {
      int wins = 0;
      for (std::size_t i = 0; i < vals.size(); ++i) wins += vals[i] >= best["random"][i];
      entry["seeds_at_or_above_random"] = wins;
    }
    methods[m] = entry;
  }
  double overall = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) overall = std::max(overall, r.best_value);
  return {{"methods", methods}, {"best_value", num_or_null(overall)},
          {"restarts", v.budget.restarts}, {"total_evals", v.budget.total_evals}};
}

json run_box_shrink(const ExperimentConfig& cfg, const MlpSurrogate& net,
                    const VectorField& field) {
  const VerifySection& v = cfg.verify;
  const OperatingBox& box = pick_box(v.box, cfg);
  const SearchObjective obj = make_discrepancy_objective(
      std::make_shared<MlpTrajectoryModel>(net), field, TimeGrid::over(v.T, v.dt));
  std::uint64_t call = 0;
  const BoxSearcher searcher = [&](const OperatingBox& b, const std::optional<Vector>& warm) {
    return run_method(cfg.box_shrink.method, obj, b, v, derive_seed(cfg.seed, 200 + call++),
                      warm);
  };
  const auto rows = box_shrink_study(searcher, box, cfg.box_shrink.widths);
  write_stream(cfg.output_dir / "box_shrink.csv",
               [&](std::ostream& os) { write_box_shrink_csv(os, rows); });
  json jr = json::array();
  for (const auto& r : rows) {
    jr.push_back({{"width_fraction", r.width_fraction},
                  {"max_error", r.max_error},
                  {"normalized_max_error", r.normalized_max_error}});
  }
  return {{"rows", jr}, {"best_value", rows.front().max_error}};
}

json run_novelty(const ExperimentConfig& cfg, const MlpSurrogate& net,
                 const VectorField& field) {
  const NoveltySection& nv = cfg.novelty;
  const OperatingBox& box = pick_box(nv.box, cfg);
  const TimeGrid grid = TimeGrid::over(nv.T, nv.dt);
  const int ns = field.n_state;
  const TrajectoryGenerator gen = [&](const Vector& eta) {
    return integrate_rk4(field, eta.head(ns), eta.tail(1), grid);
  };
  const MlpTrajectoryModel model(net);
  std::vector<SamplingRow> rows;
  double sum_nov = 0.0;
  double sum_naive = 0.0;
  int evals_nov = 0;
  int evals_naive = 0;
  for (int i = 0; i < nv.n_seeds; ++i) {
    const std::uint64_t s = derive_seed(cfg.seed, 300 + static_cast<std::uint64_t>(i));
    const auto a = novelty_sample(gen, box, nv.budget, nv.candidates_per_round, nv.beta, s);
    const auto b = naive_sample(gen, box, nv.budget, nv.candidates_per_round, nv.beta, s);
    const double ma = mean_mse_eval(a.etas, model, field, grid);
    const double mb = mean_mse_eval(b.etas, model, field, grid);
    rows.push_back({"novelty", s, ma});
    rows.push_back({"naive", s, mb});
    sum_nov += ma;
    sum_naive += mb;
    evals_nov += a.evals;
    evals_naive += b.evals;
  }
  write_stream(cfg.output_dir / "sampling_mse.csv",
               [&](std::ostream& os) { write_sampling_csv(os, rows); });
  return {{"mean_mse_novelty", sum_nov / nv.n_seeds},
          {"mean_mse_naive", sum_naive / nv.n_seeds},
          {"generator_calls_novelty", evals_nov},
          {"generator_calls_naive", evals_naive}};
}

double iq_of(double delta, const SmibConfig& smib) {
  return park_dq(network_solve(delta, smib).I, delta).I_q;
}

std::vector<CalibrationSample> iq_playback(const ExperimentConfig& cfg,
                                           const MlpSurrogate& net,
                                           const VectorField& field) {
  const DatasetSection& ds = cfg.conformal.dataset;
  const OperatingBox& box = pick_box(ds.box, cfg);
  const TimeGrid grid = TimeGrid::over(ds.T, ds.dt);
  UniformSampler sampler(box, derive_seed(cfg.seed, 500));
  std::vector<Vector> etas;
  for (int i = 0; i < ds.n_trajectories; ++i) etas.push_back(sampler.next());
  const int P = std::min(ds.points_per_trajectory, grid.n_points());
  std::vector<std::vector<CalibrationSample>> per(etas.size());
  parallel_for(etas.size(), [&](std::size_t i) {
    const Vector x0 = etas[i].head(2);
    const Vector u = etas[i].tail(1);
    const Trajectory ref = integrate_rk4(field, x0, u, grid);
    const Trajectory sur = surrogate_trajectory(net, x0, u, grid);
    for (int p = 0; p < P; ++p) {
      const int k = P == 1 ? 0
                           : static_cast<int>(std::lround(static_cast<double>(p) *
                                                          grid.n_steps / (P - 1)));
      CalibrationSample s;
      s.features.resize(4);
      s.features << x0, u, grid.time(k) - grid.t0;
      s.target = iq_of(ref.states(k, 0), cfg.smib);
      s.prediction = iq_of(sur.states(k, 0), cfg.smib);
      s.sigma = cfg.conformal.sigma;
      per[i].push_back(std::move(s));
    }
  });
  std::vector<CalibrationSample> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

json run_calibrate(const ExperimentConfig& cfg, json& summary) {
  const ConformalSection& cs = cfg.conformal;
  std::vector<CalibrationSample> data;
  if (cs.dataset.source == "synthetic") {
    data = synthetic_dataset(cs.dataset.n, cs.dataset.noise, derive_seed(cfg.seed, 600));
    for (auto& s : data) s.sigma = cs.sigma;
  } else if (cs.dataset.source == "csv") {
    data = read_calibration_csv(cs.dataset.path, cs.dataset.features, cs.dataset.target,
                                cs.dataset.prediction, cs.dataset.sigma_column);
    if (cs.dataset.sigma_column.empty()) {
      for (auto& s : data) s.sigma = cs.sigma;
    }
  } else {
    const VectorField field = model_field(cfg);
    const MlpSurrogate net = acquire_surrogate(cfg, field, summary);
    data = iq_playback(cfg, net, field);
  }
  if (cs.dataset.source != "csv") write_calibration_csv(cfg.output_dir / "playback.csv", data);

  CoverageOptions opt;
  opt.alpha = cs.alpha;
  opt.delta = cs.delta;
  opt.n_repeats = cs.n_repeats;
  opt.seed = derive_seed(cfg.seed, 400);
  opt.max_test = cs.max_test;
  const auto rows = coverage_experiment(data, cs.rhos, opt);
  write_stream(cfg.output_dir / "conformal.csv",
               [&](std::ostream& os) { write_conformal_csv(os, rows); });

  json jr = json::array();
  for (const auto& r : rows) {
    jr.push_back({{"rho", r.rho},
                  {"method", to_string(r.method)},
                  {"mean_coverage", r.mean_coverage},
                  {"mean_halfwidth", num_or_null(r.mean_halfwidth)},
                  {"n_cal", r.n_cal}});
  }
  double sigma_max = cs.sigma_max ? *cs.sigma_max : 0.0;
  if (!cs.sigma_max) {
    for (const auto& s : data) sigma_max = std::max(sigma_max, s.sigma);
  }
  json full = json::object();
  for (ConformalMethod m : {ConformalMethod::kSplit, ConformalMethod::kUcb}) {
    const CalibrationResult r = calibrate(data, cs.alpha, m, cs.delta);
    json e{{"q", num_or_null(r.q)}, {"n_cal", r.n_cal}};
    e["eps_bar"] = std::isfinite(r.q) ? json(interface_eps_bar(r, sigma_max)) : json(nullptr);
    full[to_string(m)] = e;
  }
  return {{"coverage", jr}, {"full_dataset", full}, {"sigma_max", sigma_max},
          {"n_samples", static_cast<int>(data.size())}};
}

}  // namespace

json run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  io::write_text(cfg.output_dir / "config.resolved.json", cfg.resolved.dump(2) + "\n");
  json summary{{"experiment", to_string(cfg.kind)}, {"seed", cfg.seed}, {"model", cfg.model}};
  json body;
  switch (cfg.kind) {
    case ExperimentKind::kSmibDemo: body = run_smib_demo(cfg); break;
    case ExperimentKind::kXlineSweep: body = run_xline_sweep(cfg); break;
    case ExperimentKind::kBoundReport: body = run_bound_report(cfg); break;
    case ExperimentKind::kCalibrate: body = run_calibrate(cfg, summary); break;
    case ExperimentKind::kTrain:
    case ExperimentKind::kVerify:
    case ExperimentKind::kBoxShrink:
    case ExperimentKind::kNovelty: {
      const VectorField field = model_field(cfg);
      const MlpSurrogate net = acquire_surrogate(cfg, field, summary);
      if (cfg.kind == ExperimentKind::kVerify) body = run_verify(cfg, net, field);
      if (cfg.kind == ExperimentKind::kBoxShrink) body = run_box_shrink(cfg, net, field);
      if (cfg.kind == ExperimentKind::kNovelty) body = run_novelty(cfg, net, field);
      break;
    }
  }
  for (auto& [k, v] : body.items()) summary[k] = v;
  io::write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
  emit_plot_data(cfg.output_dir);
  return summary;
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

struct PlotSpec {
  std::string csv;
  std::string dat;
  std::vector<std::string> columns;
  std::string filter_column;  // optional: keep rows where column == value
  std::string filter_value;
};

}  // namespace

std::vector<fs::path> emit_plot_data(const fs::path& out_dir) {
  const std::vector<PlotSpec> specs{
      {"perturbation.csv", "smib_errors.dat", {"t", "e_z", "e_sim"}, "", ""},
      {"sweep.csv", "xline_sweep.dat", {"x_line", "max_e_sim"}, "", ""},
      {"loss_history.csv", "training_loss.dat", {"iteration", "loss"}, "", ""},
      {"methods_comparison.csv", "methods.dat", {"method", "seed", "best_value"}, "", ""},
      {"box_shrink.csv", "box_shrink.dat", {"width_fraction", "normalized_max_error"}, "", ""},
      {"sampling_mse.csv", "sampling_mse.dat", {"method", "seed", "mean_mse"}, "", ""},
      {"constants_samples.csv", "bound_constants.dat", {"K_yz", "K_yx", "L_y", "mu_cl"},
       "skipped", "0"},
      {"conformal.csv", "conformal_split.dat", {"rho", "mean_coverage", "mean_halfwidth"},
       "method", "split"},
      {"conformal.csv", "conformal_ucb.dat", {"rho", "mean_coverage", "mean_halfwidth"},
       "method", "ucb"},
  };
  std::vector<fs::path> written;
  for (const auto& s : specs) {
    const fs::path src = out_dir / s.csv;
    if (!fs::exists(src)) continue;
    const io::CsvTable t = io::read_csv(src);
    auto col = [&](const std::string& name) {
      const auto& h = t.header();
      const auto it = std::find(h.begin(), h.end(), name);
      if (it == h.end()) throw ConfigError("column " + name + " missing from " + src.string());
      return static_cast<std::size_t>(it - h.begin());
    };
    std::vector<std::size_t> idx;
    for (const auto& c : s.columns) idx.push_back(col(c));
    std::ostringstream os;
    os << "# " << s.dat << " from " << s.csv << "\n#";
    for (const auto& c : s.columns) os << ' ' << c;
    os << '\n';
    const std::optional<std::size_t> f =
        s.filter_column.empty() ? std::nullopt : std::optional<std::size_t>(col(s.filter_column));
    for (const auto& row : t.rows()) {
      if (f && row[*f] != s.filter_value) continue;
      for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? " " : "") << row[idx[i]];
      os << '\n';
    }
    fs::create_directories(out_dir / "plot");
    const fs::path dst = out_dir / "plot" / s.dat;
    io::write_text(dst, os.str());
    written.push_back(dst);
  }
  if (written.empty()) {
    throw ConfigError("no experiment outputs found in " + out_dir.string());
  }
  return written;
}

int run(const fs::path& config_path, const Overrides& overrides, std::ostream& diag) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, overrides);
  } catch (const Error& e) {
    diag << "configuration error: " << e.what() << '\n';
    return 2;
  }
  try {
    const json summary = run_experiment(cfg);
    diag << "wrote " << (cfg.output_dir / "summary.json").string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    diag << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    diag << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace surrovv::harness
