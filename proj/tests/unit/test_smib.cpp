#include "surrovv/errors.hpp"
#include "surrovv/smib.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>

using namespace surrovv;

namespace {

SmibConfig benchmark(double x_line) {
  SmibConfig cfg;
  cfg.machine = smib_benchmark_machine();
  cfg.X_line = x_line;
  cfg.grid = TimeGrid::over(8.0, 0.01);
  return cfg;
}

}  // namespace

TEST_CASE("benchmark machine parameters") {
  const auto m = smib_benchmark_machine();
  CHECK(m.H == 3.5);
  CHECK(m.D == 0.0);
  CHECK(m.E_prime == 1.1);
  CHECK(m.X_d_prime == 0.3);
  CHECK(m.P_m0 == 0.7);
  CHECK(m.dP_m == 0.08);
  CHECK(m.t_step == 1.0);
}

TEST_CASE("network solve") {
  SUBCASE("no EMF difference") {
    SmibConfig cfg = benchmark(0.2);
    cfg.machine.E_prime = 1.0;
    const auto s = network_solve(0.0, cfg);
    CHECK(std::abs(s.I) < 1e-15);
    CHECK(std::abs(s.V - cfg.V_inf) < 1e-15);
    CHECK(std::abs(s.P_e) < 1e-15);
  }
  SUBCASE("equilibrium power") {
    const auto s = network_solve(std::asin(0.35 / 1.1), benchmark(0.2));
    CHECK(s.P_e == doctest::Approx(0.7).epsilon(1e-4));
  }
  SUBCASE("lossless closed form") {
    const SmibConfig cfg = benchmark(0.35);
    for (double d = -1.5; d <= 1.5; d += 0.1) {
      const auto s = network_solve(d, cfg);
      CHECK(std::abs(s.P_e - 1.1 * std::sin(d) / cfg.X_eq()) < 1e-12);
    }
  }
}

TEST_CASE("equilibrium") {
  SmibConfig cfg = benchmark(0.2);
  CHECK(find_equilibrium(cfg).delta0 == doctest::Approx(0.3238110152735501).epsilon(1e-12));
  cfg.machine.P_m0 = 0.0;
  CHECK(find_equilibrium(cfg).delta0 == 0.0);
  cfg.machine.P_m0 = 3.0;
  CHECK_THROWS_AS(find_equilibrium(cfg), InfeasibleDispatch);
}

TEST_CASE("disturbance window") {
  Disturbance d;
  CHECK(std::abs(window(2.1, d) - 1.0) < 1e-9);
  CHECK(window(1.2, d) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(window(0.0, d) < 1e-15);
}

TEST_CASE("zero amplitude leaves no error") {
  Disturbance d;
  d.amplitude = 0.0;
  const auto r = perturbation_run(benchmark(0.2), d);
  CHECK(r.e_z.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.e_sim.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("calibrated run hits the interface budget") {
  const SmibConfig cfg = benchmark(0.2);
  Disturbance d;
  const auto t0 = std::chrono::steady_clock::now();
  d.amplitude = calibrate_amplitude(cfg, d, 0.02);
  const auto r = perturbation_run(cfg, d);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(std::abs(r.max_e_z - 0.02) <= 1e-4 * 0.02);
  CHECK(std::abs(r.max_e_z - 0.02) <= 0.02 * 0.02);
  CHECK(secs < 1.0);
  CHECK_THROWS_AS(calibrate_amplitude(cfg, d, 0.0), ContractViolation);
}

TEST_CASE("interface error is linear for small amplitudes") {
  const SmibConfig cfg = benchmark(0.2);
  Disturbance d;
  d.amplitude = 0.002;
  const double a = perturbation_run(cfg, d).max_e_z;
  d.amplitude = 0.004;
  const double b = perturbation_run(cfg, d).max_e_z;
  CHECK(b / a == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("terminal voltage error is X_line times the current error") {
  const SmibConfig cfg = benchmark(0.3);
  Disturbance d;
  d.amplitude = calibrate_amplitude(cfg, d, 0.02);
  const auto r = perturbation_run(cfg, d);
  CHECK((r.e_y - cfg.X_line * r.e_z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weak grid amplifies the same interface error") {
  const Disturbance d;
  const auto rows = xline_sweep(benchmark(0.0), d, 0.02, {0.1, 0.5});
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].max_e_sim > rows[0].max_e_sim);
  for (const auto& r : rows) CHECK(std::abs(r.max_e_z - 0.02) <= 1e-4 * 0.02);
}

TEST_CASE("sweep") {
  const Disturbance d;
  CHECK(xline_sweep(benchmark(0.0), d, 0.02, {0.2}).size() == 1);
  const auto rows = xline_sweep(benchmark(0.0), d, 0.02, {0.05, 0.15, 0.25, 0.35, 0.45, 0.6});
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].max_e_sim >= rows[i - 1].max_e_sim);
  CHECK_THROWS_AS(xline_sweep(benchmark(0.0), d, 0.02, {0.3, 0.2}), ConfigError);
  CHECK_THROWS_AS(xline_sweep(benchmark(0.0), d, 0.02, {}), ConfigError);
}

TEST_CASE("coupled system reproduces the network map") {
  const SmibConfig cfg = benchmark(0.2);
  const auto sys = smib_coupled_system(cfg, SmibCouplingForm::kNetworkSide);
  CHECK(sys.n_x == 2);
  CHECK(sys.n_y == 2);
  CHECK(sys.n_z == 2);
  CHECK(sys.n_u == 1);
  const double delta = 0.4;
  const auto s = network_solve(delta, cfg);
  Vector x(2), z(2), u(1);
  x << delta, 0.0;
  z << s.I.real(), s.I.imag();
  u << 0.7;
  const Vector y = sys.algebraic(x, z, u);
  CHECK(std::abs(y[0] - s.V.real()) < 1e-12);
  CHECK(std::abs(y[1] - s.V.imag()) < 1e-12);
  const Vector dx = sys.f(x, y, u, 0.0);
  CHECK(dx[1] == doctest::Approx((0.7 - s.P_e) / 7.0).epsilon(1e-10));
}
