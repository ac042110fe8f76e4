#include "surrovv/verify.hpp"

#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"
#include "surrovv/optim.hpp"
#include "surrovv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <ostream>
#include <random>

namespace surrovv {

Trajectory ReferenceTrajectoryModel::simulate(const Vector& x0, const Vector& u,
                                              const TimeGrid& grid) const {
  return integrate_rk4(field_, x0, u, grid);
}

Matrix ReferenceTrajectoryModel::row_jacobian(const Vector& x0, const Vector& u,
                                              const TimeGrid& grid, int k) const {
  const Trajectory traj = integrate_rk4(field_, x0, u, grid);
  const int ns = field_.n_state;
  Matrix J(ns, ns + field_.n_param);
  for (int i = 0; i < ns; ++i) {
    Matrix rg = Matrix::Zero(traj.states.rows(), ns);
    rg(k, i) = 1.0;
    const AdjointResult a = backpropagate(field_, traj, u, rg);
    J.row(i) << a.d_x0.transpose(), a.d_params.transpose();
  }
  return J;
}

ObjectiveValue discrepancy_objective(const Vector& eta, const TrajectoryModel& model,
                                     const VectorField& field, const TimeGrid& grid,
                                     bool need_gradient) {
  const int ns = model.n_state();
  const int nu = model.n_u();
  if (field.n_state != ns || field.n_param != nu) {
    throw DimensionError("surrogate and reference field dimensions differ");
  }
  if (eta.size() != ns + nu) {
    throw DimensionError("eta must stack x0 and u (" + std::to_string(ns + nu) +
                         " entries)");
  }
  const Vector x0 = eta.head(ns);
  const Vector u = eta.tail(nu);
  ObjectiveValue out;
  Trajectory reference;
  try {
    reference = integrate_rk4(field, x0, u, grid);
  } catch (const DivergedTrajectory&) {
    out.value = std::numeric_limits<double>::infinity();
    out.diverged = true;
    return out;
  }
  const Trajectory sur = model.simulate(x0, u, grid);
  const GridMax gm = max_over_grid(sur, reference);
  out.value = gm.value;
  if (!need_gradient) return out;

  out.gradient = Vector::Zero(ns + nu);
  if (gm.value == 0.0) return out;
  const Vector n = (sur.row(gm.index) - reference.row(gm.index)) / gm.value;
  Matrix rg = Matrix::Zero(reference.states.rows(), ns);
  rg.row(gm.index) = n.transpose();
  const AdjointResult adj = backpropagate(field, reference, u, rg);
  out.gradient = model.row_jacobian(x0, u, grid, gm.index).transpose() * n;
  out.gradient.head(ns) -= adj.d_x0;
  out.gradient.tail(nu) -= adj.d_params;
  return out;
}

SearchObjective make_discrepancy_objective(std::shared_ptr<const TrajectoryModel> model,
                                           VectorField field, TimeGrid grid) {
  grid.validate();
  return [model = std::move(model), field = std::move(field), grid](
             const Vector& eta, bool need_gradient) {
    return discrepancy_objective(eta, *model, field, grid, need_gradient);
  };
}

void SearchBudget::validate() const {
  if (restarts < 1) throw ConfigError("search budget needs restarts >= 1");
  if (total_evals < restarts) {
    throw ConfigError("search budget needs total_evals >= restarts");
  }
}

InnerMethod parse_inner_method(const std::string& name) {
  if (name == "pgd") return InnerMethod::kPgd;
  if (name == "adam") return InnerMethod::kAdam;
  if (name == "sgd") return InnerMethod::kSgd;
  if (name == "lbfgs") return InnerMethod::kLbfgs;
  throw ConfigError("unknown inner method '" + name + "' (pgd, adam, sgd, lbfgs)");
}

std::string to_string(InnerMethod m) {
  switch (m) {
    case InnerMethod::kPgd: return "pgd";
    case InnerMethod::kAdam: return "adam";
    case InnerMethod::kSgd: return "sgd";
    case InnerMethod::kLbfgs: return "lbfgs";
  }
  return "?";
}

namespace {

struct Eval {
  Vector eta;
  ObjectiveValue v;
};

// Folds per-task evaluation logs into one result, in task order.
SearchResult reduce(const std::vector<std::vector<Eval>>& logs) {
  SearchResult r;
  for (const auto& log : logs) {
    for (const auto& e : log) {
      const int idx = r.eval_count++;
      if (e.v.diverged) {
        r.diverged.push_back(e.eta);
        continue;
      }
      r.trace.push_back({idx, e.v.value});
      r.points.emplace_back(e.eta, e.v.value);
      if (e.v.value > r.best_value) {
        r.best_value = e.v.value;
        r.best_eta = e.eta;
      }
    }
  }
  return r;
}

std::vector<int> split_budget(const SearchBudget& b) {
  std::vector<int> n(static_cast<std::size_t>(b.restarts), b.inner_iters());
  for (int r = 0; r < b.total_evals % b.restarts; ++r) ++n[static_cast<std::size_t>(r)];
  return n;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// One ascent run in unit-box coordinates.
std::vector<Eval> ascend(const SearchObjective& objective, const OperatingBox& box,
                         const Vector& start, int n_evals, InnerMethod method,
                         double step) {
  std::vector<Eval> log;
  const Vector width = box.width();
  auto clamp01 = [](Vector z) { return z.cwiseMax(0.0).cwiseMin(1.0); };
  auto evaluate = [&](const Vector& z, bool grad) {
    Eval e{box.project(box.from_unit(z)), {}};
    e.v = objective(e.eta, grad);
    log.push_back(e);
    return e.v;
  };

  Vector z = clamp01(box.to_unit(box.project(start)));
  optim::Adam adam(step);
  optim::LbfgsMemory memory(10);
  double lbfgs_scale = 1.0;
  double pgd_step = step;

  ObjectiveValue cur = evaluate(z, n_evals > 1);
  for (int i = 1; i < n_evals; ++i) {
    if (cur.diverged || cur.gradient.size() == 0) break;
    const Vector g = cur.gradient.cwiseProduct(width);  // d value / d z
    const bool want_grad = i + 1 < n_evals || method == InnerMethod::kLbfgs;
    switch (method) {
      case InnerMethod::kPgd: {
        // Signed step, halved whenever the trial does not improve.
        const Vector zn = clamp01(z + pgd_step * g.unaryExpr([](double v) { return sign(v); }));
        const ObjectiveValue trial = evaluate(zn, want_grad);
        if (!trial.diverged && trial.value > cur.value) {
          z = zn;
          cur = trial;
        } else {
          pgd_step *= 0.5;
        }
        break;
      }
      case InnerMethod::kAdam: {
        z = clamp01(z + adam.step(-g));
        cur = evaluate(z, want_grad);
        break;
      }
      case InnerMethod::kSgd: {
        const double gn = g.norm();
        if (gn > 0.0) z = clamp01(z + (step / std::sqrt(static_cast<double>(i))) * g / gn);
        cur = evaluate(z, want_grad);
        break;
      }
      case InnerMethod::kLbfgs: {
        // Minimizes -value; steps are capped at `step` in the max norm and
        // halved after a non-improving trial.
        Vector d = memory.direction(-g);
        const double dmax = d.cwiseAbs().maxCoeff();
        if (dmax == 0.0) {
          i = n_evals;
          break;
        }
        if (dmax * lbfgs_scale > step) d *= step / dmax;
        else d *= lbfgs_scale;
        const Vector zn = clamp01(z + d);
        const ObjectiveValue trial = evaluate(zn, true);
        if (trial.diverged || trial.gradient.size() == 0) {
          i = n_evals;
          break;
        }
        if (trial.value > cur.value) {
          memory.push(zn - z, -trial.gradient.cwiseProduct(width) + g);
          z = zn;
          cur = trial;
          lbfgs_scale = 1.0;
        } else {
          lbfgs_scale *= 0.5;
        }
        break;
      }
    }
  }
  return log;
}

}  // namespace

SearchResult random_search(const SearchObjective& objective, const OperatingBox& box,
                           const SearchBudget& budget, std::uint64_t seed) {
  budget.validate();
  box.validate();
  UniformSampler sampler(box, seed);
  std::vector<Vector> etas;
  for (int i = 0; i < budget.total_evals; ++i) etas.push_back(sampler.next());
  std::vector<std::vector<Eval>> logs(etas.size());
  parallel_for(etas.size(), [&](std::size_t i) {
    logs[i].push_back({etas[i], objective(etas[i], false)});
  });
  return reduce(logs);
}

SearchResult pgd_search(const SearchObjective& objective, const OperatingBox& box,
                        const SearchBudget& budget, InnerMethod inner, double step,
                        std::uint64_t seed, const std::optional<Vector>& warm_start) {
  budget.validate();
  box.validate();
  if (!(step > 0.0)) throw ConfigError("search step must be > 0");
  UniformSampler sampler(box, seed);
  std::vector<Vector> starts;
  for (int r = 0; r < budget.restarts; ++r) starts.push_back(sampler.next());
  if (warm_start) {
    if (warm_start->size() != box.dim()) throw DimensionError("warm start has wrong size");
    starts[0] = box.project(*warm_start);
  }
  const auto evals = split_budget(budget);
  std::vector<std::vector<Eval>> logs(starts.size());
  parallel_for(starts.size(), [&](std::size_t r) {
    logs[r] = ascend(objective, box, starts[r], evals[r], inner, step);
  });
  return reduce(logs);
}

SearchResult blackbox_search(const SearchObjective& objective, const OperatingBox& box,
                             const SearchBudget& budget, std::uint64_t seed,
                             const std::optional<Vector>& warm_start, double kappa) {
  budget.validate();
  box.validate();
  if (!(kappa >= 0.0)) throw ConfigError("exploration weight must be >= 0");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Eval>> logs(1);
  auto& log = logs[0];
  int remaining = budget.total_evals;

  auto evaluate = [&](const Vector& z) {
    Eval e{box.project(box.from_unit(z)), {}};
    e.v = objective(e.eta, false);
    log.push_back(e);
    --remaining;
    return e.v;
  };

  struct Cell {
    Vector center;
    Vector half;
    ObjectiveValue v;
  };
  std::vector<Cell> cells;
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  auto note = [&](const ObjectiveValue& v) {
    if (v.diverged) return;
    vmin = std::min(vmin, v.value);
    vmax = std::max(vmax, v.value);
  };

  if (warm_start && remaining > 0) {
    if (warm_start->size() != box.dim()) throw DimensionError("warm start has wrong size");
    note(evaluate(box.to_unit(box.project(*warm_start))));
  }
  if (remaining > 0) {
    Cell root{Vector::Constant(box.dim(), 0.5), Vector::Constant(box.dim(), 0.5), {}};
    root.v = evaluate(root.center);
    note(root.v);
    cells.push_back(root);
  }

  // The bonus weight cycles over several scales, so both small promising
  // cells and large unexplored ones get split.
  const double weights[] = {0.1, 1.0, 10.0, 100.0};
  std::size_t round = 0;
  while (remaining > 0) {
    const double range = (vmax > vmin) ? vmax - vmin : 1.0;
    const double w = kappa * weights[round++ % std::size(weights)];
    auto score = [&](const Cell& c) {
      const double v = c.v.diverged ? (std::isfinite(vmax) ? vmax : 0.0) : c.v.value;
      return v + w * c.half.norm() * range;
    };
    auto splittable = [](const Cell& c) { return c.half.maxCoeff() >= 1e-12; };
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : cells) {
      if (splittable(c)) best = std::max(best, score(c));
    }
    if (!std::isfinite(best)) break;  // every cell is at resolution
    std::vector<std::size_t> ties;
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (splittable(cells[i]) && score(cells[i]) >= best - tol) ties.push_back(i);
    }
    const std::size_t pick = ties[static_cast<std::size_t>(rng() % ties.size())];

    Cell parent = cells[pick];
    Eigen::Index dim = 0;
    parent.half.maxCoeff(&dim);
    const double h = parent.half[dim];
    parent.half[dim] = h / 3.0;
    cells[pick] = parent;
    for (double side : {-1.0, 1.0}) {
      if (remaining == 0) break;
      Cell child = parent;
      child.center[dim] += side * 2.0 * h / 3.0;
      child.v = evaluate(child.center);
      note(child.v);
      cells.push_back(child);
    }
  }
  return reduce(logs);
}

std::vector<BoxShrinkRow> box_shrink_study(const BoxSearcher& search,
                                           const OperatingBox& box,
                                           const std::vector<double>& widths) {
  box.validate();
  if (widths.empty()) throw ConfigError("box-shrink needs at least one width");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (!(widths[i] > 0.0 && widths[i] <= 1.0)) {
      throw ConfigError("box-shrink widths must lie in (0, 1]");
    }
    if (i > 0 && !(widths[i] < widths[i - 1])) {
      throw ConfigError("box-shrink widths must be strictly descending");
    }
  }
  std::vector<double> run = widths;
  if (run.front() != 1.0) run.insert(run.begin(), 1.0);

  std::vector<std::pair<Vector, double>> all;
  auto best_inside = [&](const OperatingBox& b) {
    std::optional<Vector> eta;
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& [p, val] : all) {
      if (val > v && b.contains(p, 1e-12)) {
        v = val;
        eta = p;
      }
    }
    return std::make_pair(eta, v);
  };

  for (double w : run) {
    const OperatingBox sub = box.shrunk(w);
    const auto warm = best_inside(sub).first;
    const SearchResult r = search(sub, warm);
    all.insert(all.end(), r.points.begin(), r.points.end());
  }

  const double full = best_inside(box).second;
  if (!(full > 0.0) || !std::isfinite(full)) {
    throw ContractViolation("full-box worst case must be finite and positive");
  }
  std::vector<BoxShrinkRow> rows;
  for (double w : widths) {
    BoxShrinkRow row;
    row.width_fraction = w;
    row.max_error = best_inside(box.shrunk(w)).second;
    row.normalized_max_error = row.max_error / full;
    rows.push_back(row);
  }
  return rows;
}

void write_methods_csv(std::ostream& os, const std::vector<MethodRow>& rows) {
  io::CsvTable t({"method", "seed", "best_value", "evals"});
  for (const auto& r : rows) {
    t.add_row({r.method, std::to_string(r.seed), io::format_double(r.best_value),
               std::to_string(r.evals)});
  }
  os << t.str();
}

void write_box_shrink_csv(std::ostream& os, const std::vector<BoxShrinkRow>& rows) {
  io::CsvTable t({"width_fraction", "normalized_max_error"});
  for (const auto& r : rows) {
    t.add_row({io::format_double(r.width_fraction),
               io::format_double(r.normalized_max_error)});
  }
  os << t.str();
}

}  // namespace surrovv
