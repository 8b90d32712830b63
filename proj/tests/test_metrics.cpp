#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "msfilter/ensemble.hpp"
#include "msfilter/errors.hpp"
#include "msfilter/experiment.hpp"
#include "msfilter/metrics.hpp"
#include "msfilter/registry.hpp"
#include "msfilter/rng.hpp"

using namespace msf;

namespace {

ParticleEnsemble gaussian_cloud(int n, int dim, double shift, std::uint64_t seed,
                                bool random_weights = false) {
  ParticleEnsemble ens;
  RngStream rng = RngStream::root(seed);
  ens.states.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) ens.states(i, j) = rng.normal() + shift;
  ens.log_weights = Eigen::VectorXd::Zero(n);
  if (random_weights) {
    for (int i = 0; i < n; ++i) ens.log_weights[i] = rng.normal();
  }
  ens.slow_dim = dim;
  return ens;
}

ParticleEnsemble point_mass(const Eigen::VectorXd& x) {
  ParticleEnsemble ens;
  ens.states = x.transpose();
  ens.log_weights = Eigen::VectorXd::Zero(1);
  ens.slow_dim = static_cast<int>(x.size());
  return ens;
}

MeasurePath path_of(const std::vector<ParticleEnsemble>& ensembles,
                    const std::vector<double>& times) {
  MeasurePath p;
  p.kind = MeasurePath::Kind::full;
  p.times = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  p.ensembles = ensembles;
  p.slow_dim = ensembles.empty() ? 0 : ensembles.front().slow_dim;
  return p;
}

}  // namespace

TEST_CASE("dictionary seeding, size floor and function classes") {
  const TestDictionary a = TestDictionary::make(2, 64, 5);
  const TestDictionary b = TestDictionary::make(2, 64, 5);
  const TestDictionary c = TestDictionary::make(2, 64, 6);
  REQUIRE(a.functions.size() == 64);
  CHECK(a.dim == 2);

  // the leading entries are the constants 1 and 1/2; phi == 1 exposes mass
  Eigen::VectorXd probe(2);
  probe << 0.3, -1.2;
  CHECK(a.functions[0].kind == BLFunction::Kind::constant);
  CHECK(a.functions[0](probe) == 1.0);
  CHECK(a.functions[1](probe) == 0.5);

  bool identical = true, differs = false;
  for (std::size_t k = 0; k < 64; ++k) {
    identical = identical && a.functions[k].kind == b.functions[k].kind &&
                a.functions[k].scale == b.functions[k].scale &&
                a.functions[k].offset == b.functions[k].offset &&
                a.functions[k].center == b.functions[k].center;
    differs = differs || a.functions[k].scale != c.functions[k].scale ||
              a.functions[k].offset != c.functions[k].offset;
  }
  CHECK(identical);
  CHECK(differs);

  bool has_gauss = false, has_ridge = false;
  for (const BLFunction& f : a.functions) {
    has_gauss = has_gauss || f.kind == BLFunction::Kind::gauss;
    has_ridge = has_ridge || f.kind == BLFunction::Kind::ridge;
  }
  CHECK(has_gauss);
  CHECK(has_ridge);

  CHECK_THROWS_AS(TestDictionary::make(2, 16, 5), ConfigError);
  CHECK_THROWS_AS(TestDictionary::make(0, 64, 5), ConfigError);
}

TEST_CASE("dictionary functions are bounded lipschitz") {
  const TestDictionary dict = TestDictionary::make(2, 64, 11);
  RngStream rng = RngStream::root(303);
  std::vector<Eigen::VectorXd> probes;
  for (int i = 0; i < 400; ++i) {
    Eigen::VectorXd p(2);
    p << 2.0 * rng.normal(), 2.0 * rng.normal();
    probes.push_back(p);
  }
  double max_abs = 0.0, max_slope = 0.0;
  dict.probe_bounds(probes, &max_abs, &max_slope);
  CHECK(max_abs <= 1.0 + 1e-9);
  CHECK(max_slope <= 1.0 + 1e-9);
  CHECK(max_abs > 0.4);
  CHECK(max_slope > 0.05);
}

TEST_CASE("distance identities and the signed-measure route") {
  const TestDictionary dict = TestDictionary::make(1, 64, 7);
  const ParticleEnsemble mu = gaussian_cloud(300, 1, 0.0, 41, true);
  const ParticleEnsemble nu = gaussian_cloud(200, 1, 0.6, 42, true);

  CHECK(bl_distance(mu, mu, dict) == 0.0);
  CHECK(bl_distance(mu, nu, dict) == bl_distance(nu, mu, dict));
  CHECK(bl_distance(mu, nu, dict) == bl_distance_signed(mu, nu, dict));
  CHECK(bl_distance(mu, nu, dict) > 0.0);

  // triangle inequality over seeded triples (tiny slack for the two extra
  // roundings in the comparison itself)
  for (std::uint64_t s = 0; s < 100; ++s) {
    const ParticleEnsemble p = gaussian_cloud(60, 1, 0.1 * double(s % 7), 100 + s, true);
    const ParticleEnsemble q = gaussian_cloud(50, 1, -0.2, 200 + s, true);
    const ParticleEnsemble r = gaussian_cloud(40, 1, 0.4, 300 + s, true);
    CHECK(bl_distance(p, r, dict) <= bl_distance(p, q, dict) + bl_distance(q, r, dict) + 1e-12);
  }
}

TEST_CASE("point masses reduce to direct enumeration") {
  const TestDictionary dict = TestDictionary::make(1, 64, 13);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd x1 = Eigen::VectorXd::Ones(1);

  double direct = 0.0;
  for (const BLFunction& f : dict.functions) direct = std::max(direct, std::abs(f(x0) - f(x1)));
  CHECK(bl_distance(point_mass(x0), point_mass(x1), dict) == direct);

  // far-apart point masses saturate the capped path metric
  const Eigen::VectorXd far_a = Eigen::VectorXd::Constant(1, -100.0);
  const Eigen::VectorXd far_b = Eigen::VectorXd::Constant(1, 100.0);
  const MeasurePath pa = path_of({point_mass(far_a)}, {0.0});
  const MeasurePath pb = path_of({point_mass(far_b)}, {0.0});
  CHECK(path_distance(pa, pb, dict) == 1.0);
}

TEST_CASE("a lipschitz dictionary contracts small shifts") {
  const TestDictionary dict = TestDictionary::make(1, 64, 17);
  const ParticleEnsemble mu = gaussian_cloud(500, 1, 0.0, 51);
  ParticleEnsemble shifted = mu;
  shifted.states.array() += 0.01;
  const double d = bl_distance(mu, shifted, dict);
  CHECK(d <= 0.01 * (1.0 + 1e-9));
  CHECK(d > 1e-4);
}

TEST_CASE("mass differences register in the unnormalized route only") {
  const TestDictionary dict = TestDictionary::make(1, 64, 19);
  ParticleEnsemble mu = gaussian_cloud(200, 1, 0.0, 61);
  ParticleEnsemble nu = mu;
  nu.total_mass = 0.7;

  CHECK(bl_distance(mu, nu, dict) == 0.0);

  const MeasurePath pa = path_of({mu}, {0.0});
  const MeasurePath pb = path_of({nu}, {0.0});
  CHECK(path_distance(pa, pb, dict) == 0.0);
  // phi == 1 realizes the sup: |1.0 - 0.7| exactly as floating point
  CHECK(unnormalized_path_distance(pa, pb, dict) == (1.0 - 0.7));
}

TEST_CASE("grid and dimension policing") {
  const TestDictionary dict = TestDictionary::make(1, 64, 23);
  const ParticleEnsemble mu = gaussian_cloud(50, 1, 0.0, 71);

  const MeasurePath two = path_of({mu, mu}, {0.0, 0.5});
  const MeasurePath one = path_of({mu}, {0.0});
  CHECK_THROWS_AS(path_distance(two, one, dict), GridMismatch);

  MeasurePath off = two;
  off.times[1] = 0.5000000001;
  CHECK_THROWS_AS(path_distance(two, off, dict), GridMismatch);

  MeasurePath hollow = two;
  hollow.ensembles.pop_back();
  CHECK_THROWS_AS(path_distance(two, hollow, dict), GridMismatch);

  const TestDictionary wide = TestDictionary::make(3, 64, 23);
  CHECK_THROWS_AS(bl_distance(mu, mu, wide), ConfigError);
}

TEST_CASE("full ensembles score identically to their slow marginals") {
  const TestDictionary dict = TestDictionary::make(1, 64, 29);
  ParticleEnsemble a = gaussian_cloud(150, 3, 0.0, 81, true);
  ParticleEnsemble b = gaussian_cloud(170, 3, 0.3, 82, true);
  a.slow_dim = 1;
  b.slow_dim = 1;
  const double full = bl_distance(a, b, dict);
  CHECK(full == bl_distance(slow_marginal(a), slow_marginal(b), dict));
  CHECK(full > 0.0);
}

TEST_CASE("surrogate value is stable across dictionary seeds") {
  const ParticleEnsemble mu = gaussian_cloud(4000, 1, 0.0, 91);
  const ParticleEnsemble nu = gaussian_cloud(4000, 1, 0.5, 92);
  double lo = 2.0, hi = 0.0;
  for (const std::uint64_t seed : {3ULL, 33ULL, 333ULL, 3333ULL}) {
    const double d = bl_distance(mu, nu, TestDictionary::make(1, 64, seed));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(lo > 0.08);
  CHECK(hi < 0.45);
  CHECK(hi - lo < 0.5 * (0.5 * (hi + lo)));
}

TEST_CASE("scale-free model yields flat distances that shrink with particles") {
  const ModelRegistryEntry& entry = find_model("xonly");
  const MultiscaleModel model = entry.make();
  Eigen::VectorXd lo(1), hi(1);
  lo << -3.0;
  hi << 3.0;
  Eigen::VectorXi counts(1);
  counts << 17;
  const AveragedModel avg =
      tabulate_averaged_model(entry.facts.averaged, TensorGrid::uniform(lo, hi, counts), 1, 1);

  ConvergenceSettings settings;
  settings.eps_list = {0.5, 0.25};
  settings.replications = 12;
  settings.n_particles = 400;
  settings.T = 1.0;
  settings.store_cap = 32;
  settings.dict_size = 64;
  const ConvergenceReport r400 = convergence_experiment(model, avg, settings, 2024);
  REQUIRE(r400.rows.size() == 2);
  CHECK(r400.rows[0].failures == 0);
  CHECK(r400.rows[1].failures == 0);

  // no eps dependence anywhere in the slow law: the gap is pure monte carlo
  const double pooled =
      std::sqrt(r400.rows[0].se_dnorm * r400.rows[0].se_dnorm +
                r400.rows[1].se_dnorm * r400.rows[1].se_dnorm);
  CHECK(std::abs(r400.rows[0].mean_dnorm - r400.rows[1].mean_dnorm) < 3.0 * pooled);

  ConvergenceSettings big = settings;
  big.n_particles = 1600;
  const ConvergenceReport r1600 = convergence_experiment(model, avg, big, 2024);
  CHECK(r1600.rows[0].mean_dnorm < 0.8 * r400.rows[0].mean_dnorm);

  // fan-out is a pure reindexing: any worker count reproduces the report
  ConvergenceSettings fan = settings;
  fan.workers = 3;
  const ConvergenceReport rfan = convergence_experiment(model, avg, fan, 2024);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(rfan.rows[e].mean_dnorm == r400.rows[e].mean_dnorm);
    CHECK(rfan.rows[e].se_dnorm == r400.rows[e].se_dnorm);
    CHECK(rfan.rows[e].mean_dunnorm == r400.rows[e].mean_dunnorm);
    CHECK(rfan.dnorm_samples[e] == r400.dnorm_samples[e]);
  }

  // common-random-number coupling cancels the shared sampling noise: with no
  // eps dependence the coupled gap collapses far below the two-cloud floor
  ConvergenceSettings cpl = settings;
  cpl.couple = true;
  const ConvergenceReport rcpl = convergence_experiment(model, avg, cpl, 2024);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(rcpl.rows[e].failures == 0);
    CHECK(rcpl.rows[e].mean_dnorm < 0.5 * r400.rows[e].mean_dnorm);
    CHECK(rcpl.rows[e].mean_dunnorm < 0.5 * r400.rows[e].mean_dunnorm);
  }
}

TEST_CASE("experiment validation and failure capture") {
  const ModelRegistryEntry& entry = find_model("xonly");
  const MultiscaleModel model = entry.make();
  Eigen::VectorXd lo(1), hi(1);
  lo << -3.0;
  hi << 3.0;
  Eigen::VectorXi counts(1);
  counts << 9;
  const AveragedModel avg =
      tabulate_averaged_model(entry.facts.averaged, TensorGrid::uniform(lo, hi, counts), 1, 1);

  ConvergenceSettings bad;
  bad.eps_list = {0.25, 0.5};  // must be strictly decreasing
  CHECK_THROWS_AS(convergence_experiment(model, avg, bad, 1), ConfigError);
  bad.eps_list = {1.5};
  CHECK_THROWS_AS(convergence_experiment(model, avg, bad, 1), ConfigError);
  bad.eps_list = {0.5};
  bad.replications = 0;
  CHECK_THROWS_AS(convergence_experiment(model, avg, bad, 1), ConfigError);

  // a grid the particles leave immediately: every replication fails, the
  // sweep itself survives and reports them
  Eigen::VectorXd nlo(1), nhi(1);
  nlo << -0.02;
  nhi << 0.02;
  Eigen::VectorXi ncounts(1);
  ncounts << 3;
  const AveragedModel narrow =
      tabulate_averaged_model(entry.facts.averaged, TensorGrid::uniform(nlo, nhi, ncounts), 1, 1);
  ConvergenceSettings doomed;
  doomed.eps_list = {0.5};
  doomed.replications = 4;
  doomed.n_particles = 50;
  doomed.store_cap = 16;
  const ConvergenceReport rep = convergence_experiment(model, narrow, doomed, 77);
  CHECK(rep.rows[0].failures == 4);
  CHECK(rep.failure_messages.size() == 4);
}

TEST_CASE("report csv and json formats") {
  const ModelRegistryEntry& entry = find_model("xonly");
  const MultiscaleModel model = entry.make();
  Eigen::VectorXd lo(1), hi(1);
  lo << -3.0;
  hi << 3.0;
  Eigen::VectorXi counts(1);
  counts << 9;
  const AveragedModel avg =
      tabulate_averaged_model(entry.facts.averaged, TensorGrid::uniform(lo, hi, counts), 1, 1);

  ConvergenceSettings settings;
  settings.eps_list = {0.5};
  settings.replications = 3;
  settings.n_particles = 60;
  settings.store_cap = 8;
  ConvergenceReport rep = convergence_experiment(model, avg, settings, 5);
  rep.model_name = "xonly";
  rep.config_hash = 0x1234;

  const std::string csv_path = "/tmp/msf_test_report.csv";
  const std::string json_path = "/tmp/msf_test_report.json";
  write_convergence_csv(csv_path, rep);
  const Config cfg = Config::from_string("[run]\nmodel = xonly\n");
  write_convergence_json(json_path, rep, cfg);

  std::ifstream csv(csv_path);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "# config=0000000000001234 seed=5");
  std::getline(csv, line);
  CHECK(line == "eps,mean_dnorm,se_dnorm,mean_dunnorm,se_dunnorm,R,failures");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1);

  std::ifstream jf(json_path);
  const nlohmann::json j = nlohmann::json::parse(jf);
  CHECK(j.at("kind").get<std::string>() == "convergence-report");
  CHECK(j.at("model").get<std::string>() == "xonly");
  CHECK(j.at("seed").get<std::uint64_t>() == 5);
  CHECK(j.at("rows").size() == 1);
  CHECK(j.at("config").at("run.model").get<std::string>() == "xonly");
  std::remove(csv_path.c_str());
  std::remove(json_path.c_str());
}
