#include "surrovv/errors.hpp"
#include "surrovv/harness.hpp"
#include "surrovv/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace surrovv;
using namespace surrovv::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("surrovv_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json smib_demo() {
  return {{"experiment", "smib-demo"},
          {"seed", 1},
          {"smib", {{"X_line", 0.2}}},
          {"disturbance", {{"epsilon", 0.02}}}};
}

}  // namespace

TEST_CASE("experiment names round-trip") {
  for (const auto& n : experiment_names()) CHECK(to_string(parse_experiment(n)) == n);
  CHECK(experiment_names().size() == 8);
  CHECK_THROWS_AS(parse_experiment("fly"), ConfigError);
}

TEST_CASE("strict parsing") {
  SUBCASE("unknown top-level key") {
    json j = smib_demo();
    j["colour"] = "red";
    CHECK_THROWS_AS(parse_config(j, {}), ConfigError);
  }
  SUBCASE("unknown nested key") {
    json j = smib_demo();
    j["smib"]["X_lin"] = 0.3;
    CHECK_THROWS_AS(parse_config(j, {}), ConfigError);
  }
  SUBCASE("wrong type") {
    json j = smib_demo();
    j["smib"]["X_line"] = "weak";
    CHECK_THROWS_AS(parse_config(j, {}), ConfigError);
  }
  SUBCASE("custom models are API-only") {
    json j = smib_demo();
    j["model"] = "custom";
    CHECK_THROWS_AS(parse_config(j, {}), ConfigError);
  }
}

TEST_CASE("physically meaningful values have no defaults") {
  json j = smib_demo();
  j["smib"].erase("X_line");
  CHECK_THROWS_AS(parse_config(j, {}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "xline-sweep"}}, {}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "calibrate"}, {"conformal", {{"sigma", 1.0}}}}, {}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "calibrate"}, {"conformal", {{"delta", 0.05}}}}, {}),
                  ConfigError);
  json b{{"experiment", "bound-report"},
         {"smib", {{"X_line", 0.2}}},
         {"bound", {{"box", {{"lo", {0, 0, 0, 0, 0}}, {"hi", {1, 1, 1, 1, 1}}}}}}};
  CHECK_THROWS_AS(parse_config(b, {}), ConfigError);
  json n{{"experiment", "novelty"},
         {"smib", {{"X_line", 0.2}}},
         {"surrogate", {{"weights", "w.json"}}},
         {"novelty", {{"box", {{"lo", {0, 0, 0}}, {"hi", {1, 1, 1}}}}}}};
  CHECK_THROWS_AS(parse_config(n, {}), ConfigError);
}

TEST_CASE("overrides and resolved values") {
  Overrides o;
  o.seed = 42;
  o.output_dir = "elsewhere";
  const auto cfg = parse_config(smib_demo(), o);
  CHECK(cfg.seed == 42);
  CHECK(cfg.output_dir == fs::path("elsewhere"));
  CHECK(cfg.resolved["seed"] == 42);
  CHECK(cfg.resolved["smib"]["T"] == 8.0);
  CHECK(cfg.resolved["smib"]["dt"] == 0.01);
  CHECK(cfg.resolved["disturbance"]["t_on"] == 1.2);
  CHECK(cfg.smib.grid.n_steps == 800);
  Overrides e;
  e.experiment = "xline-sweep";
  json j = smib_demo();
  j["sweep"] = {{"x_line", {0.1, 0.2}}};
  CHECK_THROWS_AS(parse_config(j, e), ConfigError);
  j.erase("experiment");
  CHECK(parse_config(j, e).kind == ExperimentKind::kXlineSweep);
}

TEST_CASE("invalid configuration exits 2 without writing anything") {
  const fs::path dir = scratch("invalid");
  json j = smib_demo();
  j["bogus"] = 1;
  j["output_dir"] = (dir / "out").string();
  std::ostringstream diag;
  CHECK(run(write_config(dir, j), {}, diag) == 2);
  CHECK(!fs::exists(dir / "out"));
  CHECK(diag.str().find("bogus") != std::string::npos);
  CHECK(run(dir / "missing.json", {}, diag) == 2);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run(dir / "broken.json", {}, diag) == 2);
}

TEST_CASE("smib demo hits the interface budget") {
  const fs::path dir = scratch("demo");
  Overrides o;
  o.output_dir = dir / "out";
  std::ostringstream diag;
  REQUIRE(run(write_config(dir, smib_demo()), o, diag) == 0);
  const json s = json::parse(read_file(dir / "out" / "summary.json"));
  CHECK(std::abs(s["max_e_z"].get<double>() - 0.02) <= 0.02 * 0.02);
  CHECK(fs::exists(dir / "out" / "config.resolved.json"));
  CHECK(fs::exists(dir / "out" / "perturbation.csv"));
  CHECK(fs::exists(dir / "out" / "plot" / "smib_errors.dat"));
}

TEST_CASE("plot data projections") {
  const fs::path dir = scratch("plots");
  std::ostringstream diag;
  SUBCASE("xline sweep") {
    json j{{"experiment", "xline-sweep"},
           {"smib", {{"T", 8.0}}},
           {"sweep", {{"x_line", {0.1, 0.3}}}}};
    Overrides o;
    o.output_dir = dir / "sweep";
    REQUIRE(run(write_config(dir, j), o, diag) == 0);
    const auto t = read_file(dir / "sweep" / "plot" / "xline_sweep.dat");
    std::istringstream in(t);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream f(line);
      double a, b;
      std::string extra;
      CHECK(static_cast<bool>(f >> a >> b));
      CHECK(!(f >> extra));
      ++rows;
    }
    CHECK(rows == 2);
  }
  SUBCASE("conformal") {
    json j{{"experiment", "calibrate"},
           {"conformal",
            {{"delta", 0.05},
             {"sigma", 1.0},
             {"n_repeats", 20},
             {"rhos", {0.1, 0.5}},
             {"dataset", {{"n", 200}}}}}};
    Overrides o;
    o.output_dir = dir / "conf";
    REQUIRE(run(write_config(dir, j), o, diag) == 0);
    for (const char* f : {"conformal_split.dat", "conformal_ucb.dat"}) {
      const auto t = read_file(dir / "conf" / "plot" / f);
      CHECK(t.find("# rho mean_coverage") != std::string::npos);
    }
  }
  SUBCASE("box shrink csv projection") {
    fs::create_directories(dir / "bs");
    io::write_text(dir / "bs" / "box_shrink.csv",
                   "width_fraction,normalized_max_error\n1,1\n0.5,0.25\n");
    const auto files = emit_plot_data(dir / "bs");
    REQUIRE(files.size() == 1);
    CHECK(read_file(files[0]).find("\n1 1\n0.5 0.25\n") != std::string::npos);
  }
  SUBCASE("nothing to plot") { CHECK_THROWS_AS(emit_plot_data(dir), ConfigError); }
}

TEST_CASE("re-running a config reproduces its csv files byte for byte") {
  const fs::path dir = scratch("determinism");
  json j{{"experiment", "calibrate"},
         {"seed", 5},
         {"conformal",
          {{"delta", 0.05},
           {"sigma", 1.0},
           {"n_repeats", 30},
           {"dataset", {{"n", 300}}}}}};
  const fs::path cfg = write_config(dir, j);
  std::ostringstream diag;
  Overrides a, b;
  a.output_dir = dir / "a";
  b.output_dir = dir / "b";
  REQUIRE(run(cfg, a, diag) == 0);
  REQUIRE(run(cfg, b, diag) == 0);
  for (const char* f : {"conformal.csv", "playback.csv"}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
}
