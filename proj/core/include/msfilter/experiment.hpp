#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msfilter/averaging.hpp"
#include "msfilter/config.hpp"
#include "msfilter/metrics.hpp"
#include "msfilter/model.hpp"
#include "msfilter/particle_filter.hpp"

namespace msf {

struct ConvergenceSettings {
  std::vector<double> eps_list;  // strictly decreasing, in (0, 1]
  int replications = 50;
  int n_particles = 2000;
  double T = 1.0;
  double dt_factor = 0.1;  // simulation/observation grid: dt ~ dt_factor * eps^2
  int dict_size = 64;
  std::uint64_t dict_seed = 97;
  // target number of stored (metric-evaluated) grid times per path; endpoints
  // always kept, both filters share the thinning so grids stay bitwise equal
  int store_cap = 128;
  int workers = 1;
  // Common-random-number coupling: run the filter pair through
  // particle_filter_coupled so the shared Monte Carlo fluctuation cancels
  // from the distances. Off by default: independent seeds keep the distances
  // an honest picture of the raw particle noise (a z-independent model then
  // reads as pure MC noise shrinking with N), coupling is the low-variance
  // estimator of the filter gap itself.
  bool couple = false;
  FilterOptions filter;
};

struct EpsRow {
  double eps = 0.0;
  double mean_dnorm = 0.0;
  double se_dnorm = 0.0;
  double mean_dunnorm = 0.0;
  double se_dunnorm = 0.0;
  int replications = 0;
  int failures = 0;
};

struct ConvergenceReport {
  std::string model_name;
  std::vector<EpsRow> rows;  // ordered by decreasing eps
  double runtime_seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t dict_seed = 0;
  std::uint64_t config_hash = 0;
  // per (eps index, replication): distances for successful runs, NaN rows for
  // failures; kept for CLT diagnostics
  std::vector<std::vector<double>> dnorm_samples;
  std::vector<std::vector<double>> dunnorm_samples;
  std::vector<std::string> failure_messages;
};

// For each eps and replication: simulate one truth + observation path, run
// the full and the averaged filter on that SAME observation path, and record
// D_norm = 1 ^ sup_t bl(pi^eps_t, pi^0_t) and
// D_unnorm = sup_{phi,t} |rho^eps_t(phi) - rho^0_t(phi)| on the slow state.
// Module errors inside one replication are recorded as failures without
// aborting the sweep. Replications fan out over `workers` threads with
// per-index RNG streams; aggregation runs in fixed index order, so the report
// is identical for any worker count.
ConvergenceReport convergence_experiment(const MultiscaleModel& model, const AveragedModel& avg,
                                         const ConvergenceSettings& settings, std::uint64_t seed);

// CSV columns: eps,mean_dnorm,se_dnorm,mean_dunnorm,se_dunnorm,R,failures
// (one row per eps, %.17g, provenance comment on top).
void write_convergence_csv(const std::string& path, const ConvergenceReport& report);

// JSON twin carrying the full config echo plus runtime.
void write_convergence_json(const std::string& path, const ConvergenceReport& report,
                            const Config& config);

}  // namespace msf
