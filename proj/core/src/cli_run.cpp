#include "msfilter/cli_run.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "msfilter/averaging.hpp"
#include "msfilter/csv.hpp"
#include "msfilter/errors.hpp"
#include "msfilter/experiment.hpp"
#include "msfilter/logging.hpp"
#include "msfilter/measure_path.hpp"
#include "msfilter/metrics.hpp"
#include "msfilter/particle_filter.hpp"
#include "msfilter/poisson.hpp"
#include "msfilter/registry.hpp"
#include "msfilter/sde.hpp"

namespace msf {

namespace {

StationaryParams stationary_from(const Config& cfg) {
  StationaryParams p;
  p.dt = cfg.get_double_or("avg.dt", p.dt);
  p.burn_in_time = cfg.get_double_or("avg.burn_in", p.burn_in_time);
  p.n_samples = cfg.get_int_or("avg.samples", p.n_samples);
  p.thin_time = cfg.get_double_or("avg.thin", p.thin_time);
  p.ess_floor = cfg.get_double_or("avg.ess_floor", p.ess_floor);
  return p;
}

PoissonParams poisson_from(const Config& cfg) {
  PoissonParams p;
  p.stationary = stationary_from(cfg);
  p.t_max = cfg.get_double_or("avg.poisson_tmax", p.t_max);
  p.dt = cfg.get_double_or("avg.poisson_dt", p.dt);
  p.path_pairs = cfg.get_int_or("avg.poisson_pairs", p.path_pairs);
  p.deriv_rel_step = cfg.get_double_or("avg.deriv_rel_step", p.deriv_rel_step);
  p.truncation_tol = cfg.get_double_or("avg.truncation_tol", p.truncation_tol);
  return p;
}

AveragingParams averaging_from(const Config& cfg) {
  AveragingParams p;
  p.stationary = stationary_from(cfg);
  p.poisson = poisson_from(cfg);
  p.coeff_samples = cfg.get_int_or("avg.coeff_samples", p.coeff_samples);
  p.psd_tol = cfg.get_double_or("avg.psd_tol", p.psd_tol);
  return p;
}

TensorGrid grid_from(const Config& cfg, int m) {
  std::vector<double> lo{-3.0}, hi{3.0}, cnt{13.0};
  if (cfg.has("grid.lo")) lo = cfg.get_double_list("grid.lo");
  if (cfg.has("grid.hi")) hi = cfg.get_double_list("grid.hi");
  if (cfg.has("grid.count")) cnt = cfg.get_double_list("grid.count");
  if (lo.size() == 1 && m > 1) lo.assign(static_cast<std::size_t>(m), lo[0]);
  if (hi.size() == 1 && m > 1) hi.assign(static_cast<std::size_t>(m), hi[0]);
  if (cnt.size() == 1 && m > 1) cnt.assign(static_cast<std::size_t>(m), cnt[0]);
  if (static_cast<int>(lo.size()) != m || static_cast<int>(hi.size()) != m ||
      static_cast<int>(cnt.size()) != m) {
    throw ConfigError("grid.lo/hi/count must have one entry per slow dimension");
  }
  Eigen::VectorXd vlo(m), vhi(m);
  Eigen::VectorXi vc(m);
  for (int i = 0; i < m; ++i) {
    vlo[i] = lo[static_cast<std::size_t>(i)];
    vhi[i] = hi[static_cast<std::size_t>(i)];
    vc[i] = static_cast<int>(cnt[static_cast<std::size_t>(i)]);
    if (!(vlo[i] < vhi[i]) || vc[i] < 2) {
      throw ConfigError("grid axes need lo < hi and count >= 2");
    }
  }
  return TensorGrid::uniform(vlo, vhi, vc);
}

FilterOptions filter_from(const Config& cfg) {
  FilterOptions fo;
  fo.resample.enabled = cfg.get_bool_or("filter.resample", fo.resample.enabled);
  fo.resample.ess_fraction = cfg.get_double_or("filter.ess_fraction", fo.resample.ess_fraction);
  fo.store_every = cfg.get_int_or("filter.store_every", fo.store_every);
  if (fo.store_every < 1) throw ConfigError("filter.store_every must be >= 1");
  return fo;
}

double required_T(const Config& cfg) {
  const double T = cfg.get_double("sim.T");
  if (!(T > 0.0)) throw ConfigError("sim.T must be positive");
  return T;
}

double required_eps(const Config& cfg) {
  const double eps = cfg.get_double("sim.eps");
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("sim.eps must lie in (0, 1]");
  return eps;
}

// Priority: explicit artifact path, then the config's source choice
// (mc | analytic | auto = analytic when the registry vouches for one).
AveragedModel resolve_averaged(const ModelRegistryEntry& entry, const MultiscaleModel& model,
                               const Config& cfg, std::uint64_t seed,
                               const std::string& default_source) {
  const std::string path = cfg.get_string_or("filter.avgmodel", "");
  if (!path.empty()) {
    log_info("loading averaged model from " + path);
    AveragedModel avg = load_averaged_model(path);
    if (avg.m != model.m || avg.w != model.w || avg.d != model.d) {
      throw ConfigError("averaged model '" + path + "' does not match the model dimensions");
    }
    return avg;
  }
  const std::string source = cfg.get_string_or("avg.source", default_source);
  const TensorGrid grid = grid_from(cfg, model.m);
  if (source == "analytic" || (source == "auto" && entry.facts.has_averaged)) {
    if (!entry.facts.has_averaged) {
      throw ConfigError("model '" + entry.name + "' has no analytic averaged coefficients");
    }
    log_info("tabulating analytic averaged coefficients for " + entry.name);
    return tabulate_averaged_model(entry.facts.averaged, grid, model.w, model.d,
                                   cfg.get_double_or("avg.psd_tol", 1e-8));
  }
  if (source != "mc" && source != "auto") {
    throw ConfigError("avg.source must be one of mc, analytic, auto");
  }
  log_info("building Monte Carlo averaged model for " + entry.name);
  return build_averaged_model(model, grid, averaging_from(cfg), seed);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

int sub_simulate(const ModelRegistryEntry& entry, const Config& cfg, std::uint64_t seed,
                 const std::string& out_dir) {
  const MultiscaleModel model = entry.make();
  SimulateOptions opts;
  opts.dt = cfg.get_double_or("sim.dt", 0.0);
  opts.dt_factor = cfg.get_double_or("sim.dt_factor", 0.1);
  const PathBundle path = simulate_multiscale(model, required_eps(cfg), required_T(cfg), seed, opts);
  const std::string out = join_path(out_dir, "path.csv");
  std::ofstream os(out, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + out + "' for writing");
  write_path_csv(path, os, Provenance{cfg.hash(), seed});
  log_info("wrote " + out);
  return 0;
}

int sub_average(const ModelRegistryEntry& entry, const Config& cfg, std::uint64_t seed,
                const std::string& out_dir) {
  const MultiscaleModel model = entry.make();
  const std::string source = cfg.get_string_or("avg.source", "mc");
  AveragedModel avg;
  if (source == "analytic") {
    if (!entry.facts.has_averaged) {
      throw ConfigError("model '" + entry.name + "' has no analytic averaged coefficients");
    }
    avg = tabulate_averaged_model(entry.facts.averaged, grid_from(cfg, model.m), model.w, model.d,
                                  cfg.get_double_or("avg.psd_tol", 1e-8));
  } else if (source == "mc" || source == "auto") {
    avg = build_averaged_model(model, grid_from(cfg, model.m), averaging_from(cfg), seed);
  } else {
    throw ConfigError("avg.source must be one of mc, analytic, auto");
  }
  for (const NodeDiagnostics& d : avg.diagnostics) {
    for (const std::string& wmsg : d.warnings) log_info("node warning: " + wmsg);
  }
  const std::string out = join_path(out_dir, "avgmodel.json");
  save_averaged_model(avg, out, Provenance{cfg.hash(), seed});
  log_info("wrote " + out);
  return 0;
}

int sub_filter(const ModelRegistryEntry& entry, const Config& cfg, std::uint64_t seed,
               const std::string& out_dir) {
  const MultiscaleModel model = entry.make();
  const double T = required_T(cfg);
  const double eps = required_eps(cfg);
  const int n_particles = cfg.get_int_or("filter.particles", 1000);
  if (n_particles < 1) throw ConfigError("filter.particles must be >= 1");
  const AveragedModel avg = resolve_averaged(entry, model, cfg, seed, "auto");

  RngStream root = RngStream::root(seed);
  SimulateOptions sim;
  sim.dt = cfg.get_double_or("sim.dt", 0.0);
  sim.dt_factor = cfg.get_double_or("sim.dt_factor", 0.1);
  const PathBundle truth = simulate_multiscale(model, eps, T, root.child(1).key(), sim);
  const ObservationPath obs = truth.observations();
  const FilterOptions fo = filter_from(cfg);

  const MeasurePath full =
      particle_filter_full(model, eps, obs, n_particles, root.child(2).key(), fo);
  const MeasurePath reduced =
      particle_filter_averaged(avg, model, obs, n_particles, root.child(3).key(), fo);

  const Provenance prov{cfg.hash(), seed};
  {
    const std::string out = join_path(out_dir, "path.csv");
    std::ofstream os(out, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + out + "' for writing");
    write_path_csv(truth, os, prov);
    log_info("wrote " + out);
  }
  const auto emit = [&](const MeasurePath& mp, const std::string& name) {
    const std::string out = join_path(out_dir, name);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + out + "' for writing");
    write_filter_csv(mp, os, prov);
    log_info("wrote " + out);
  };
  emit(full, "filter_full.csv");
  emit(reduced, "filter_averaged.csv");

  if (cfg.get_bool_or("filter.dump_ensembles", false)) {
    const auto dump = [&](const MeasurePath& mp, const std::string& name) {
      const std::string out = join_path(out_dir, name);
      std::ofstream os(out, std::ios::binary);
      if (!os) throw ConfigError("cannot open '" + out + "' for writing");
      write_ensemble_dump(mp, os);
      log_info("wrote " + out);
    };
    dump(full, "ensembles_full.pfv1");
    dump(reduced, "ensembles_averaged.pfv1");
  }
  return 0;
}

int sub_converge(const ModelRegistryEntry& entry, const Config& cfg, std::uint64_t seed,
                 const std::string& out_dir, int workers) {
  const MultiscaleModel model = entry.make();
  ConvergenceSettings st;
  st.eps_list = cfg.get_double_list("converge.eps_list");
  st.replications = cfg.get_int_or("converge.replications", st.replications);
  st.n_particles = cfg.get_int_or("converge.particles", st.n_particles);
  st.T = required_T(cfg);
  st.dt_factor = cfg.get_double_or("sim.dt_factor", st.dt_factor);
  st.dict_size = cfg.get_int_or("converge.dict_size", st.dict_size);
  st.dict_seed = cfg.get_u64_or("converge.dict_seed", st.dict_seed);
  st.store_cap = cfg.get_int_or("converge.store_cap", st.store_cap);
  st.couple = cfg.get_bool_or("converge.couple", st.couple);
  st.workers = workers;
  st.filter = filter_from(cfg);

  const AveragedModel avg = resolve_averaged(entry, model, cfg, seed, "auto");
  ConvergenceReport report = convergence_experiment(model, avg, st, seed);
  report.model_name = entry.name;
  report.config_hash = cfg.hash();

  const std::string csv = join_path(out_dir, "report.csv");
  write_convergence_csv(csv, report);
  log_info("wrote " + csv);
  const std::string js = join_path(out_dir, "report.json");
  write_convergence_json(js, report, cfg);
  log_info("wrote " + js);
  return 0;
}

int sub_check(const ModelRegistryEntry& entry, const Config& cfg, std::uint64_t seed) {
  const MultiscaleModel model = entry.make();
  AssumptionParams ap;
  ap.stationary = stationary_from(cfg);
  ap.alpha = cfg.get_double_or("check.alpha", ap.alpha);
  ap.probes = cfg.get_int_or("check.probes", ap.probes);
  ap.radius = cfg.get_double_or("check.radius", ap.radius);
  ap.x_spread = cfg.get_double_or("check.x_spread", ap.x_spread);
  const AssumptionReport rep = check_assumptions(model, ap, seed);

  std::cout << "model: " << entry.name << "\n";
  std::cout << "hypotheses: " << entry.hypothesis_notes << "\n";
  std::cout << "recurrence margin (alpha=" << g17(rep.hf_alpha) << "): " << g17(rep.hf_margin)
            << (rep.hf_ok ? "  ok" : "  VIOLATED") << "\n";
  std::cout << "ellipticity range: [" << g17(rep.hg_lambda_min) << ", " << g17(rep.hg_lambda_max)
            << "]" << (rep.hg_ok ? "  ok" : "  VIOLATED") << "\n";
  std::cout << "centering residual:";
  for (Eigen::Index i = 0; i < rep.centering_mean.size(); ++i) {
    std::cout << " " << g17(rep.centering_mean[i]) << " (se " << g17(rep.centering_se[i]) << ")";
  }
  std::cout << (rep.centering_ok ? "  ok" : "  VIOLATED") << "\n";
  for (const std::string& note : rep.notes) std::cout << "note: " << note << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::string& subcommand, const Config& cfg, const CliOverrides& ov) {
  try {
    const std::string model_name = cfg.get_string("run.model");
    const ModelRegistryEntry& entry = find_model(model_name);
    const std::uint64_t seed = ov.has_seed ? ov.seed : cfg.get_u64_or("run.seed", 1);
    const std::string out_dir = !ov.out_dir.empty() ? ov.out_dir : cfg.get_string_or("run.out", ".");
    const int workers = ov.workers > 0 ? ov.workers : cfg.get_int_or("run.workers", 1);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    if (subcommand == "simulate") return sub_simulate(entry, cfg, seed, out_dir);
    if (subcommand == "average") return sub_average(entry, cfg, seed, out_dir);
    if (subcommand == "filter") return sub_filter(entry, cfg, seed, out_dir);
    if (subcommand == "converge") return sub_converge(entry, cfg, seed, out_dir, workers);
    if (subcommand == "check") return sub_check(entry, cfg, seed);
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

int run_cli_file(const std::string& subcommand, const std::string& config_path,
                 const CliOverrides& ov) {
  Config cfg;
  try {
    cfg = Config::from_file(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return run_cli(subcommand, cfg, ov);
}

}  // namespace msf
