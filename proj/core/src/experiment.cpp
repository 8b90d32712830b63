#include "msfilter/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "msfilter/csv.hpp"
#include "msfilter/errors.hpp"
#include "msfilter/logging.hpp"
#include "msfilter/parallel.hpp"
#include "msfilter/sde.hpp"

namespace msf {

namespace {

void validate(const ConvergenceSettings& s) {
  if (s.eps_list.empty()) throw ConfigError("eps_list is empty");
  for (std::size_t i = 0; i < s.eps_list.size(); ++i) {
    const double e = s.eps_list[i];
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("eps_list entries must lie in (0, 1]");
    if (i > 0 && !(e < s.eps_list[i - 1])) {
      throw ConfigError("eps_list must be strictly decreasing");
    }
  }
  if (s.replications < 1) throw ConfigError("replications must be >= 1");
  if (s.n_particles < 1) throw ConfigError("n_particles must be >= 1");
  if (!(s.T > 0.0)) throw ConfigError("T must be positive");
}

struct RepResult {
  double dnorm = std::numeric_limits<double>::quiet_NaN();
  double dunnorm = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string message;
};

void mean_se(const std::vector<double>& xs, double* mean, double* se) {
  const int n = static_cast<int>(xs.size());
  if (n == 0) {
    *mean = std::numeric_limits<double>::quiet_NaN();
    *se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double s = 0.0;
  for (double x : xs) s += x;
  const double mu = s / n;
  *mean = mu;
  if (n < 2) {
    *se = 0.0;
    return;
  }
  double q = 0.0;
  for (double x : xs) q += (x - mu) * (x - mu);
  *se = std::sqrt(q / (n - 1) / n);
}

}  // namespace

ConvergenceReport convergence_experiment(const MultiscaleModel& model, const AveragedModel& avg,
                                         const ConvergenceSettings& settings, std::uint64_t seed) {
  validate(settings);
  if (!model.whitened) throw ConfigError("convergence_experiment requires a whitened model");
  const auto t0 = std::chrono::steady_clock::now();

  const int n_eps = static_cast<int>(settings.eps_list.size());
  const int R = settings.replications;
  const TestDictionary dict = TestDictionary::make(model.m, settings.dict_size, settings.dict_seed);

  std::vector<RepResult> results(static_cast<std::size_t>(n_eps) * R);
  RngStream exp_root = RngStream::root(seed).child(stream_id::experiment);

  parallel_for(static_cast<int>(results.size()), settings.workers, [&](int idx) {
    const int eps_i = idx / R;
    const int rep = idx % R;
    const double eps = settings.eps_list[static_cast<std::size_t>(eps_i)];
    RngStream rep_stream =
        exp_root.child(static_cast<std::uint64_t>(eps_i)).child(static_cast<std::uint64_t>(rep));
    RepResult& out = results[static_cast<std::size_t>(idx)];
    try {
      // copy: whitened coefficient closures carry per-copy scratch buffers
      const MultiscaleModel local = model;
      SimulateOptions sim;
      sim.dt_factor = settings.dt_factor;
      const PathBundle truth =
          simulate_multiscale(local, eps, settings.T, rep_stream.child(1).key(), sim);
      const ObservationPath obs = truth.observations();

      const int K = static_cast<int>(obs.times.size()) - 1;
      FilterOptions fo = settings.filter;
      fo.store_every = std::max(1, K / std::max(1, settings.store_cap));

      if (settings.couple) {
        const CoupledFilterResult pair = particle_filter_coupled(
            local, eps, avg, obs, settings.n_particles, rep_stream.child(2).key(), fo);
        out.dnorm = path_distance(pair.full, pair.averaged, dict);
        out.dunnorm = unnormalized_path_distance(pair.full, pair.averaged, dict);
      } else {
        const MeasurePath full = particle_filter_full(local, eps, obs, settings.n_particles,
                                                      rep_stream.child(2).key(), fo);
        const MeasurePath reduced = particle_filter_averaged(
            avg, local, obs, settings.n_particles, rep_stream.child(3).key(), fo);
        out.dnorm = path_distance(full, reduced, dict);
        out.dunnorm = unnormalized_path_distance(full, reduced, dict);
      }
      out.ok = true;
    } catch (const Error& e) {
      out.ok = false;
      out.message = e.what();
    }
  });

  ConvergenceReport report;
  report.seed = seed;
  report.dict_seed = settings.dict_seed;
  report.rows.resize(static_cast<std::size_t>(n_eps));
  report.dnorm_samples.resize(static_cast<std::size_t>(n_eps));
  report.dunnorm_samples.resize(static_cast<std::size_t>(n_eps));

  for (int eps_i = 0; eps_i < n_eps; ++eps_i) {
    EpsRow& row = report.rows[static_cast<std::size_t>(eps_i)];
    row.eps = settings.eps_list[static_cast<std::size_t>(eps_i)];
    row.replications = R;
    std::vector<double> dn, du;
    for (int rep = 0; rep < R; ++rep) {
      const RepResult& r = results[static_cast<std::size_t>(eps_i) * R + rep];
      auto& dns = report.dnorm_samples[static_cast<std::size_t>(eps_i)];
      auto& dus = report.dunnorm_samples[static_cast<std::size_t>(eps_i)];
      if (r.ok) {
        dn.push_back(r.dnorm);
        du.push_back(r.dunnorm);
        dns.push_back(r.dnorm);
        dus.push_back(r.dunnorm);
      } else {
        ++row.failures;
        dns.push_back(std::numeric_limits<double>::quiet_NaN());
        dus.push_back(std::numeric_limits<double>::quiet_NaN());
        report.failure_messages.push_back("eps=" + g17(row.eps) + " rep=" + std::to_string(rep) +
                                          ": " + r.message);
        log_error("replication failed: " + report.failure_messages.back());
      }
    }
    mean_se(dn, &row.mean_dnorm, &row.se_dnorm);
    mean_se(du, &row.mean_dunnorm, &row.se_dunnorm);
  }

  const auto t1 = std::chrono::steady_clock::now();
  report.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
  return report;
}

void write_convergence_csv(const std::string& path, const ConvergenceReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_provenance_comment(os, Provenance{report.config_hash, report.seed});
  os << "eps,mean_dnorm,se_dnorm,mean_dunnorm,se_dunnorm,R,failures\n";
  for (const EpsRow& r : report.rows) {
    os << g17(r.eps) << ',' << g17(r.mean_dnorm) << ',' << g17(r.se_dnorm) << ','
       << g17(r.mean_dunnorm) << ',' << g17(r.se_dunnorm) << ',' << r.replications << ','
       << r.failures << '\n';
  }
}

void write_convergence_json(const std::string& path, const ConvergenceReport& report,
                            const Config& config) {
  nlohmann::json j;
  j["kind"] = "convergence-report";
  j["model"] = report.model_name;
  j["seed"] = report.seed;
  j["dict_seed"] = report.dict_seed;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(report.config_hash));
  j["config_hash"] = hex;
  j["runtime_seconds"] = report.runtime_seconds;
  j["config"] = nlohmann::json::object();
  for (const auto& kv : config.entries()) j["config"][kv.first] = kv.second;
  j["rows"] = nlohmann::json::array();
  for (const EpsRow& r : report.rows) {
    nlohmann::json row;
    row["eps"] = r.eps;
    row["mean_dnorm"] = r.mean_dnorm;
    row["se_dnorm"] = r.se_dnorm;
    row["mean_dunnorm"] = r.mean_dunnorm;
    row["se_dunnorm"] = r.se_dunnorm;
    row["R"] = r.replications;
    row["failures"] = r.failures;
    j["rows"].push_back(row);
  }
  if (!report.failure_messages.empty()) j["failures"] = report.failure_messages;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

}  // namespace msf
