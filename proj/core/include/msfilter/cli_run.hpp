#pragma once

#include <cstdint>
#include <string>

#include "msfilter/config.hpp"

namespace msf {

struct CliOverrides {
  bool has_seed = false;
  std::uint64_t seed = 0;
  int workers = 0;      // 0: use run.workers from the config
  std::string out_dir;  // empty: use run.out from the config
};

// Orchestrates one subcommand against a parsed config. Subcommands:
//   simulate  one truth+observation path           -> path.csv
//   average   Monte Carlo averaged model           -> avgmodel.json
//   filter    both filters, one observation path   -> path.csv, filter_full.csv,
//                                                     filter_averaged.csv [, *.pfv1]
//   converge  eps sweep of filter distances        -> report.csv, report.json
//   check     hypothesis + centering diagnostics   -> stdout
// Returns 0 on success, 2 on configuration errors, 3 on numerical failures.
int run_cli(const std::string& subcommand, const Config& config, const CliOverrides& ov = {});

// Convenience wrapper: parses the file, then runs. A parse failure is a
// config error (exit 2).
int run_cli_file(const std::string& subcommand, const std::string& config_path,
                 const CliOverrides& ov = {});

}  // namespace msf
