#include "surrovv/novelty.hpp"
#include "surrovv/smib.hpp"
#include "surrovv/verify.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

using namespace surrovv;

namespace {

Trajectory constant_traj(const Vector& v, int n_steps = 9) {
  Trajectory t;
  t.grid = {0.0, 0.1, n_steps};
  t.states = v.transpose().replicate(n_steps + 1, 1);
  return t;
}

double min_pairwise(const TrajectoryArchive& a) {
  double m = INFINITY;
  for (int i = 0; i < a.size(); ++i)
    for (int j = i + 1; j < a.size(); ++j)
      m = std::min(m, traj_distance(a.members[static_cast<std::size_t>(i)],
                                    a.members[static_cast<std::size_t>(j)]));
  return m;
}

OperatingBox unit_box(int d) { return {Vector::Zero(d), Vector::Ones(d)}; }

}  // namespace

TEST_CASE("trajectory distance") {
  Trajectory a;
  a.grid = {0.0, 0.1, 9};
  a.states = Matrix::Random(10, 2);
  CHECK(traj_distance(a, a) == 0.0);
  Trajectory b = a;
  b.states.col(0).array() += 0.3;
  b.states.col(1).array() -= 0.4;
  CHECK(traj_distance(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  Trajectory c = a;
  c.states.topRows(5).col(0).array() += 1.0;
  CHECK(traj_distance(a, c) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("distance is a metric on random triples") {
  for (int i = 0; i < 100; ++i) {
    Trajectory a, b, c;
    a.grid = b.grid = c.grid = {0.0, 0.1, 7};
    a.states = Matrix::Random(8, 3);
    b.states = Matrix::Random(8, 3);
    c.states = Matrix::Random(8, 3);
    CHECK(traj_distance(a, b) == traj_distance(b, a));
    CHECK(traj_distance(a, c) <= traj_distance(a, b) + traj_distance(b, c) + 1e-12);
  }
}

TEST_CASE("novelty score") {
  const Trajectory cand = constant_traj(Vector::Zero(2));
  TrajectoryArchive arch;
  arch.beta = 2.0;
  CHECK(std::isinf(novelty_score(cand, arch)));
  arch.add(constant_traj((Vector(2) << 0.6, 0.8).finished()));
  CHECK(novelty_score(cand, arch) == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) arch.add(constant_traj((Vector(2) << 0.6, 0.8).finished()));
  CHECK(novelty_score(cand, arch) == doctest::Approx(1.0 - std::log(5.0) / 2.0).epsilon(1e-12));
  arch.add(cand);
  CHECK(novelty_score(cand, arch) <= 0.0);
}

TEST_CASE("novelty score stays finite for far-away archives") {
  TrajectoryArchive arch;
  arch.beta = 50.0;
  arch.add(constant_traj(Vector::Constant(1, 100.0)));
  arch.add(constant_traj(Vector::Constant(1, 101.0)));
  const double n = novelty_score(constant_traj(Vector::Zero(1)), arch);
  CHECK(std::isfinite(n));
  CHECK(n == doctest::Approx(10000.0 - 0.0).epsilon(1e-9));
}

TEST_CASE("log-sum-exp sandwich on random archives") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> size(1, 12);
  for (int trial = 0; trial < 100; ++trial) {
    TrajectoryArchive arch;
    arch.beta = 0.1 + std::abs(u(rng)) * 5;
    const int k = size(rng);
    const Trajectory cand = constant_traj((Vector(2) << u(rng), u(rng)).finished());
    double dmin = INFINITY;
    for (int i = 0; i < k; ++i) {
      Trajectory m = constant_traj((Vector(2) << u(rng), u(rng)).finished());
      m.states += 0.1 * Matrix::Random(m.states.rows(), 2);
      dmin = std::min(dmin, std::pow(traj_distance(cand, m), 2));
      arch.add(m);
    }
    const double n = novelty_score(cand, arch);
    CHECK(n <= dmin + 1e-12);
    CHECK(n >= dmin - std::log(static_cast<double>(k)) / arch.beta - 1e-12);
  }
}

TEST_CASE("budget of one keeps the first draw") {
  const TrajectoryGenerator gen = [](const Vector& e) { return constant_traj(e); };
  const auto r = novelty_sample(gen, unit_box(2), 1, 8, 1.0, 3);
  CHECK(r.evals == 1);
  REQUIRE(r.archive.size() == 1);
  UniformSampler s(unit_box(2), 3);
  CHECK((r.etas[0] - s.next()).norm() == 0.0);
}

TEST_CASE("two-cluster generator is covered") {
  const TrajectoryGenerator gen = [](const Vector& e) {
    return constant_traj(Vector::Constant(1, (e[0] < 0.5 ? 5.0 : -5.0) + 0.1 * e[0]));
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = novelty_sample(gen, unit_box(1), 25, 8, 1.0, seed);
    REQUIRE(r.archive.size() == 4);
    bool hi = false, lo = false;
    for (const auto& m : r.archive.members) {
      hi |= m.states(0, 0) > 0.0;
      lo |= m.states(0, 0) < 0.0;
    }
    CHECK((hi && lo));
  }
}

TEST_CASE("novelty and naive sampling spend the same budget") {
  const TrajectoryGenerator gen = [](const Vector& e) { return constant_traj(e); };
  for (int budget : {1, 2, 9, 25, 30}) {
    const auto a = novelty_sample(gen, unit_box(2), budget, 8, 1.0, 5);
    const auto b = naive_sample(gen, unit_box(2), budget, 8, 1.0, 5);
    CHECK(a.evals == budget);
    CHECK(b.evals == budget);
    CHECK(a.archive.size() == b.archive.size());
  }
}

TEST_CASE("novelty sampling spreads the archive") {
  const TrajectoryGenerator gen = [](const Vector& e) {
    Trajectory t;
    t.grid = {0.0, 0.1, 10};
    t.states.resize(11, 2);
    for (int k = 0; k <= 10; ++k) {
      const double tk = t.grid.time(k);
      t.states(k, 0) = e[0] * (1.0 + tk);
      t.states(k, 1) = e[1] * (1.0 - 0.5 * tk) + 0.2 * std::sin(3 * e[0] * tk);
    }
    return t;
  };
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = novelty_sample(gen, unit_box(2), 25, 8, 10.0, seed);
    const auto b = naive_sample(gen, unit_box(2), 25, 8, 10.0, seed);
    wins += min_pairwise(a.archive) >= min_pairwise(b.archive);
  }
  CHECK(wins >= 40);
}

TEST_CASE("mean MSE evaluation") {
  SmibConfig cfg;
  cfg.machine = smib_benchmark_machine();
  cfg.machine.dP_m = 0.0;
  cfg.X_line = 0.2;
  const auto field = smib_field(cfg);
  const TimeGrid grid = TimeGrid::over(0.5, 0.01);
  const std::vector<Vector> etas{(Vector(3) << 0.3, 0.1, 0.7).finished(),
                                 (Vector(3) << 0.5, -0.2, 0.6).finished()};
  CHECK(mean_mse_eval(etas, ReferenceTrajectoryModel(field), field, grid) == 0.0);
  MlpSurrogate net(2, 1, {4});
  net.initialize(2);
  net.set_t_max(0.2);
  const MlpTrajectoryModel model(net);
  const auto u = model.simulate(etas[0].head(2), etas[0].tail(1), grid);
  const auto g = integrate_rk4(field, etas[0].head(2), etas[0].tail(1), grid);
  const double expect = (u.states - g.states).rowwise().squaredNorm().mean();
  CHECK(mean_mse_eval({etas[0]}, model, field, grid) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("novelty reaches poorly trained regions") {
  SmibConfig cfg;
  cfg.machine = smib_benchmark_machine();
  cfg.machine.dP_m = 0.0;
  cfg.X_line = 0.2;
  const auto field = smib_field(cfg);
  const OperatingBox nominal((Vector(3) << 0.3, -0.1, 0.65).finished(),
                             (Vector(3) << 0.4, 0.1, 0.75).finished());
  const OperatingBox wide((Vector(3) << 0.0, -1.0, 0.4).finished(),
                          (Vector(3) << 0.8, 1.0, 1.0).finished());
  const auto set = make_training_set(field, nominal, 0.2, 300, 60, 60, 4);
  MlpSurrogate net(2, 1, {16, 16});
  net.initialize(5);
  net.normalization() = InputNormalization::fit(
      {(Vector(4) << nominal.lo, 0.0).finished(), (Vector(4) << nominal.hi, 0.2).finished()});
  TrainOptions o;
  o.max_iters = 200;
  const auto trained = train(net, set, field, o).net;
  auto model = std::make_shared<MlpTrajectoryModel>(trained);
  const TimeGrid grid = TimeGrid::over(0.4, 0.01);
  const TrajectoryGenerator gen = [&](const Vector& e) {
    return model->simulate(e.head(2), e.tail(1), grid);
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = novelty_sample(gen, wide, 25, 8, 1.0, seed);
    const auto b = naive_sample(gen, wide, 25, 8, 1.0, seed);
    CHECK(mean_mse_eval(a.etas, *model, field, grid) >= mean_mse_eval(b.etas, *model, field, grid));
  }
}

TEST_CASE("sampling csv header") {
  std::ostringstream os;
  write_sampling_csv(os, {{"novelty", 2, 0.5}});
  CHECK(os.str() == "method,seed,mean_mse\nnovelty,2,0.5\n");
}
