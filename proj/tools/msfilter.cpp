#include <array>
#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "msfilter/cli_run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"multiscale correlated-noise filtering workbench"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  app.add_option("--config", config_path, "configuration file (key = value sections)")->required();
  CLI::Option* seed_opt = app.add_option("--seed", seed, "root seed override");
  app.add_option("--workers", workers, "worker thread count override");
  app.add_option("--out", out_dir, "output directory override");

  app.add_subcommand("simulate", "emit one truth + observation path as CSV");
  app.add_subcommand("average", "build and save the averaged (homogenized) model");
  app.add_subcommand("filter", "run both filters on one shared observation path");
  app.add_subcommand("converge", "eps sweep of filter distances with report CSV/JSON");
  app.add_subcommand("check", "hypothesis and centering diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  msf::CliOverrides ov;
  ov.has_seed = seed_opt->count() > 0;
  ov.seed = seed;
  ov.workers = workers;
  ov.out_dir = out_dir;
  return msf::run_cli_file(app.get_subcommands().front()->get_name(), config_path, ov);
}
