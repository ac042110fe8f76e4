// surrovv <subcommand> --config <path> [--seed N] [--out DIR]

#include "surrovv/errors.hpp"
#include "surrovv/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config,-c", c.config, "JSON experiment config");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, "override the output directory");
}

surrovv::harness::Overrides overrides(const Common& c) {
  surrovv::harness::Overrides o;
  o.seed = c.seed;
  if (c.out) o.output_dir = *c.out;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification and validation of surrogate dynamic-component models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "surrovv 0.1.0");

  Common common;
  std::string chosen;
  for (const auto& name : surrovv::harness::experiment_names()) {
    auto* cmd = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(cmd, common, true);
    cmd->callback([&chosen, name] { chosen = name; });
  }
  auto* run_cmd = app.add_subcommand("run", "run the experiment named in the config");
  add_common(run_cmd, common, true);
  run_cmd->callback([&chosen] { chosen = "run"; });

  Common plot;
  auto* plot_cmd = app.add_subcommand("plot-data", "regenerate gnuplot data from outputs");
  add_common(plot_cmd, plot, false);
  plot_cmd->callback([&chosen] { chosen = "plot-data"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (chosen == "plot-data") {
    try {
      std::filesystem::path dir;
      if (plot.out) {
        dir = *plot.out;
      } else if (!plot.config.empty()) {
        dir = surrovv::harness::load_config(plot.config, overrides(plot)).output_dir;
      } else {
        std::cerr << "plot-data needs --out or --config\n";
        return 2;
      }
      for (const auto& p : surrovv::harness::emit_plot_data(dir)) {
        std::cout << p.string() << '\n';
      }
      return 0;
    } catch (const surrovv::ConfigError& e) {
      std::cerr << "configuration error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }

  auto o = overrides(common);
  if (chosen != "run") o.experiment = chosen;
  return surrovv::harness::run(common.config, o, std::cerr);
}
