// Acceptance gate: eight go/no-go criteria run end to end against the
// installed library. Each criterion prints exactly one PASS/FAIL line with
// the measured quantity, the pinned tolerance, and the wall time; the exit
// code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msfilter/averaging.hpp"
#include "msfilter/cli_run.hpp"
#include "msfilter/config.hpp"
#include "msfilter/ensemble.hpp"
#include "msfilter/experiment.hpp"
#include "msfilter/kalman.hpp"
#include "msfilter/measure_path.hpp"
#include "msfilter/metrics.hpp"
#include "msfilter/model.hpp"
#include "msfilter/particle_filter.hpp"
#include "msfilter/poisson.hpp"
#include "msfilter/registry.hpp"
#include "msfilter/rng.hpp"
#include "msfilter/sde.hpp"
#include "msfilter/stationary.hpp"

using namespace msf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run_criterion(const char* id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.pass) ++g_failures;
  std::printf("%s %s  %-34s %s  [%.1fs]\n", id, out.pass ? "PASS" : "FAIL", name,
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Scalar slow/fast OU pair with correlated sensor noise; b_I = c z. The fast
// block is the standard OU generator (f = -z, g = sqrt 2), so the frozen-fast
// semigroup and the cell problem both have closed forms.
MultiscaleModel make_fast_ou(double c) {
  MultiscaleModel mdl;
  mdl.m = mdl.n = mdl.w = mdl.v = mdl.u = mdl.d = 1;
  mdl.b = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    out(0) = -x(0);
  };
  mdl.b_I = [c](const Eigen::VectorXd&, const Eigen::VectorXd& z, Eigen::VectorXd& out) {
    out(0) = c * z(0);
  };
  mdl.sigma = [](const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = 0.5;
  };
  mdl.f = [](const Eigen::VectorXd&, const Eigen::VectorXd& z, Eigen::VectorXd& out) {
    out(0) = -z(0);
  };
  mdl.g = [](const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out(0, 0) = std::sqrt(2.0);
  };
  mdl.h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::VectorXd& out) {
    out(0) = std::tanh(x(0));
  };
  mdl.alpha = Eigen::MatrixXd::Constant(1, 1, 0.6);
  mdl.gamma = Eigen::MatrixXd::Constant(1, 1, 0.8);
  mdl.init = [](RngStream& rng, Eigen::VectorXd& x0, Eigen::VectorXd& z0) {
    x0(0) = 0.5 * rng.normal();
    z0(0) = rng.normal();
  };
  mdl.flags.centered_drift = true;
  return whiten(mdl);
}

TensorGrid grid1d(double lo, double hi, int count) {
  return TensorGrid::uniform(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi),
                             Eigen::VectorXi::Constant(1, count));
}

ParticleEnsemble random_cloud(int n, double shift, double spread, std::uint64_t seed,
                              double mass) {
  RngStream rng = RngStream::root(seed);
  ParticleEnsemble ens;
  ens.states.resize(n, 1);
  ens.log_weights.resize(n);
  for (int i = 0; i < n; ++i) {
    ens.states(i, 0) = shift + spread * rng.normal();
    ens.log_weights(i) = 0.3 * rng.normal();
  }
  ens.slow_dim = 1;
  ens.total_mass = mass;
  return ens;
}

// ---------------------------------------------------------------------------
// C1: frozen-fast semigroup against the OU closed form
//   E[cos Z_t | Z_0 = z] = exp(-(1 - e^{-2t})/2) cos(e^{-t} z)
Outcome c1_semigroup() {
  const MultiscaleModel mdl = make_fast_ou(0.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const ZFn phi = [](const Eigen::VectorXd& z, Eigen::VectorXd& out) { out(0) = std::cos(z(0)); };
  const int n_paths = 100000;
  const double dt = 0.003;

  double worst = 0.0;
  int combo = 0;
  for (double t : {0.1, 0.5, 2.0}) {
    for (double z0v : {0.0, 1.0, -2.0}) {
      const Eigen::VectorXd z0 = Eigen::VectorXd::Constant(1, z0v);
      const SemigroupEstimate est =
          semigroup_mc(mdl, x, phi, 1, t, z0, n_paths, dt, 1100 + combo++);
      const double truth =
          std::exp(-0.5 * (1.0 - std::exp(-2.0 * t))) * std::cos(std::exp(-t) * z0v);
      worst = std::max(worst, std::abs(est.value(0) - truth) / est.se(0));
    }
  }
  return {worst <= 3.0, "max |err|/se " + fmt(worst) + " over t{0.1,0.5,2} z{0,1,-2} (limit 3; " +
                            "1e5 paths, dt 0.003)"};
}

// ---------------------------------------------------------------------------
// C2: cell-problem solver on b_I = z, whose solution is u(z) = z exactly
Outcome c2_poisson() {
  const MultiscaleModel mdl = make_fast_ou(1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  PoissonParams pp;
  pp.t_max = 15.0;
  pp.dt = 0.005;
  pp.path_pairs = 16;
  const CellProblemSolution sol = solve_poisson(mdl, x, pp, 2024);

  const auto ufn = [&](const Eigen::VectorXd& z) { return sol.evaluate(z); };
  double worst_u = 0.0, worst_res = 0.0;
  for (double zv : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, zv);
    worst_u = std::max(worst_u, std::abs(sol.evaluate(z)(0) - zv));
    // generator identity G_F u = -b_I, so the residual is (G_F u)(z) + z
    worst_res = std::max(worst_res, std::abs(fd_generator(mdl, x, ufn, 1, z)(0) + zv));
  }
  return {worst_u < 0.02 && worst_res < 0.05,
          "max |u-z| " + fmt(worst_u) + " (limit 0.02), max |Gu+z| " + fmt(worst_res) +
              " (limit 0.05); t_max 15, dt 0.005, 16 antithetic pairs"};
}

// ---------------------------------------------------------------------------
// C3: averaged coefficients: atilde = 2c^2 and btilde = 0 on ou-linear within
// 3 SE; on the z-independent model the tabulated nodes equal the exact
// coefficients to fp accuracy.
Outcome c3_averaged() {
  const ModelRegistryEntry& lin = find_model("ou-linear");
  AveragingParams ap;
  ap.poisson.t_max = 15.0;
  ap.poisson.dt = 0.005;
  ap.poisson.path_pairs = 16;
  NodeDiagnostics diag;
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.3);
  const AveragedCoeffs cf = averaged_coefficients(lin.make(), x, ap, 303, &diag);
  const double err_a = std::abs(cf.atilde(0, 0) - 0.5);
  const double lim_a = 3.0 * diag.atilde_se(0, 0);
  const double err_b = std::abs(cf.btilde(0));
  // btilde's per-sample values are fp dust (du/dx is identically zero), so the
  // 3 SE band gets an absolute floor at fp scale
  const double lim_b = std::max(3.0 * diag.btilde_se(0), 1e-8);

  const ModelRegistryEntry& xo = find_model("xonly");
  AveragingParams bp;
  bp.stationary.n_samples = 256;
  bp.stationary.thin_time = 0.4;
  bp.poisson.path_pairs = 8;
  bp.coeff_samples = 128;
  const TensorGrid grid = grid1d(-2.0, 2.0, 9);
  const AveragedModel am = build_averaged_model(xo.make(), grid, bp, 404);
  double worst_id = 0.0;
  AveragedCoeffs got;
  Eigen::MatrixXd sqa, sqe;
  for (int i = 0; i < grid.points(); ++i) {
    const Eigen::VectorXd xi = grid.node(i);
    const AveragedCoeffs truth = xo.facts.averaged(xi);
    am.coeffs_at(xi, got, sqa, sqe);
    worst_id = std::max(worst_id, std::abs(got.bbar(0) - truth.bbar(0)));
    worst_id = std::max(worst_id, std::abs(got.hbar(0) - truth.hbar(0)));
    worst_id = std::max(worst_id, std::abs(got.sigbar(0, 0) - truth.sigbar(0, 0)));
    worst_id = std::max(worst_id, std::abs(got.abar(0, 0) - truth.abar(0, 0)));
    worst_id = std::max(worst_id, std::abs(got.atilde(0, 0)));
    worst_id = std::max(worst_id, std::abs(got.btilde(0)));
  }
  const bool pass = err_a <= lim_a && err_b <= lim_b && worst_id <= 1e-8;
  return {pass, "|atilde-0.5| " + fmt(err_a) + " (3 SE " + fmt(lim_a) + "), |btilde| " +
                    fmt(err_b) + " (3 SE+floor " + fmt(lim_b) +
                    "), z-free node identity max err " + fmt(worst_id) + " (limit 1e-8)"};
}

// ---------------------------------------------------------------------------
// C4: both particle filters against their exact Kalman-Bucy posteriors on the
// linear model, 20 replications, per-rep band 3 sqrt(P_T)/sqrt(N), 95% rate.
Outcome c4_filter_oracle() {
  const ModelRegistryEntry& lin = find_model("ou-linear");
  const MultiscaleModel mdl = lin.make();
  const double eps = 0.25, T = 1.0;
  const int n_particles = 4000, reps = 20;
  const AveragedModel avg =
      tabulate_averaged_model(lin.facts.averaged, grid1d(-4.0, 4.0, 33), mdl.w, mdl.d, 1e-8);
  FilterOptions fo;
  fo.store_every = 1 << 20;  // only the endpoint matters here

  int ok_full = 0, ok_avg = 0;
  for (int r = 0; r < reps; ++r) {
    RngStream rep = RngStream::root(777).child(r);
    const PathBundle truth = simulate_multiscale(mdl, eps, T, rep.child(1).key());
    const ObservationPath obs = truth.observations();

    const MeasurePath full = particle_filter_full(mdl, eps, obs, n_particles, rep.child(2).key(), fo);
    const MeasurePath red =
        particle_filter_averaged(avg, mdl, obs, n_particles, rep.child(3).key(), fo);
    const MeasurePath kb_joint = kalman_bucy(lin.facts.joint_kalman(eps), obs);
    const MeasurePath kb_avg = kalman_bucy(lin.facts.averaged_kalman(), obs);

    const double m_full = slow_mean(full.ensembles.back())(0);
    const double m_red = slow_mean(red.ensembles.back())(0);
    const GaussianState& gj = kb_joint.gaussians.back();
    const GaussianState& ga = kb_avg.gaussians.back();
    const double root_n = std::sqrt(static_cast<double>(n_particles));
    if (std::abs(m_full - gj.mean(0)) <= 3.0 * std::sqrt(gj.cov(0, 0)) / root_n) ++ok_full;
    if (std::abs(m_red - ga.mean(0)) <= 3.0 * std::sqrt(ga.cov(0, 0)) / root_n) ++ok_avg;
  }
  const bool pass = ok_full >= 19 && ok_avg >= 19;
  return {pass, "full " + std::to_string(ok_full) + "/20, averaged " + std::to_string(ok_avg) +
                    "/20 within 3 sqrt(P_T)/sqrt(4000) (need >= 19; eps 0.25, T 1)"};
}

// ---------------------------------------------------------------------------
// C5: reference-measure mass is an exact martingale: mean of rho_T(1) over
// 200 replications within 3 SE of 1 for both filters.
Outcome c5_mass(const MultiscaleModel& decay, const AveragedModel& decay_avg) {
  const double eps = 0.5, T = 1.0, dt = 0.025;
  const int n_particles = 256, reps = 200;
  FilterOptions fo;
  fo.store_every = 1 << 20;

  Eigen::VectorXd mass_full(reps), mass_avg(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream rep = RngStream::root(888).child(r);
    const ObservationPath obs = simulate_reference_observation(1, T, dt, rep.child(1).key());
    mass_full[r] = particle_filter_full(decay, eps, obs, n_particles, rep.child(2).key(), fo)
                       .ensembles.back()
                       .total_mass;
    mass_avg[r] = particle_filter_averaged(decay_avg, decay, obs, n_particles,
                                           rep.child(3).key(), fo)
                      .ensembles.back()
                      .total_mass;
  }
  const auto band = [reps](const Eigen::VectorXd& m, double& dev, double& lim) {
    const double mean = m.mean();
    const double sd = std::sqrt((m.array() - mean).square().sum() / (reps - 1));
    dev = std::abs(mean - 1.0);
    lim = 3.0 * sd / std::sqrt(static_cast<double>(reps));
  };
  double dev_f, lim_f, dev_a, lim_a;
  band(mass_full, dev_f, lim_f);
  band(mass_avg, dev_a, lim_a);
  return {dev_f <= lim_f && dev_a <= lim_a,
          "|mean-1| full " + fmt(dev_f) + " (3 SE " + fmt(lim_f) + "), averaged " + fmt(dev_a) +
              " (3 SE " + fmt(lim_a) + "); 200 reps"};
}

// ---------------------------------------------------------------------------
// C6: the eps sweep trend: consecutive means decrease up to one pooled
// stderr and the final mean is below half the first, for the capped distance
// and the unnormalized statistic alike.
Outcome c6_trend(const MultiscaleModel& decay, const AveragedModel& decay_avg) {
  ConvergenceSettings st;
  st.eps_list = {0.5, 0.35, 0.25, 0.18, 0.125};
  st.replications = 50;
  st.n_particles = 2000;
  st.T = 1.0;
  st.store_cap = 96;
  // Coupled pair evaluation: the gap between the filters is small against the
  // raw two-cloud sampling floor at N=2000, so the trend is read through the
  // common-random-number estimator of the same distances.
  st.couple = true;
  const ConvergenceReport rep = convergence_experiment(decay, decay_avg, st, 991);

  int total_failures = 0;
  for (const EpsRow& row : rep.rows) total_failures += row.failures;

  const auto trend_ok = [&](auto mean_of, auto se_of, double& worst_gap) {
    bool ok = true;
    worst_gap = -1e300;
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
      const double pooled = std::hypot(se_of(rep.rows[i]), se_of(rep.rows[i + 1]));
      const double gap = mean_of(rep.rows[i + 1]) - (mean_of(rep.rows[i]) + pooled);
      worst_gap = std::max(worst_gap, gap);
      if (gap > 0.0) ok = false;
    }
    if (!(mean_of(rep.rows.back()) < 0.5 * mean_of(rep.rows.front()))) ok = false;
    return ok;
  };
  double gap_n = 0.0, gap_u = 0.0;
  const bool ok_n = trend_ok([](const EpsRow& r) { return r.mean_dnorm; },
                             [](const EpsRow& r) { return r.se_dnorm; }, gap_n);
  const bool ok_u = trend_ok([](const EpsRow& r) { return r.mean_dunnorm; },
                             [](const EpsRow& r) { return r.se_dunnorm; }, gap_u);

  std::ostringstream os;
  os << "dnorm ";
  for (const EpsRow& r : rep.rows) os << fmt(r.mean_dnorm) << " ";
  os << (ok_n ? "(monotone+halved ok)" : "(TREND BROKEN)") << ", dunnorm ";
  for (const EpsRow& r : rep.rows) os << fmt(r.mean_dunnorm) << " ";
  os << (ok_u ? "(ok)" : "(TREND BROKEN)") << ", failures " << total_failures;
  return {ok_n && ok_u, os.str()};
}

// ---------------------------------------------------------------------------
// C7: metric surrogate properties, all exact assertions.
Outcome c7_metric() {
  const TestDictionary dict = TestDictionary::make(1, 64, 97);
  bool ok = true;

  for (int i = 0; i < 10 && ok; ++i) {
    const ParticleEnsemble a = random_cloud(60, 0.2 * i, 1.0, 7000 + i, 1.0);
    ok = bl_distance(a, a, dict) == 0.0;
  }
  for (int i = 0; i < 20 && ok; ++i) {
    const ParticleEnsemble a = random_cloud(50, -0.5, 1.2, 7100 + i, 1.0);
    const ParticleEnsemble b = random_cloud(70, 0.4, 0.8, 7200 + i, 1.0);
    const double ab = bl_distance(a, b, dict);
    ok = ab == bl_distance(b, a, dict) && ab == bl_distance_signed(a, b, dict);
  }
  double worst_tri = 0.0;
  for (int i = 0; i < 100; ++i) {
    const ParticleEnsemble a = random_cloud(40, -1.0 + 0.02 * i, 1.0, 7300 + i, 1.0);
    const ParticleEnsemble b = random_cloud(55, 0.5, 1.5, 7400 + i, 1.0);
    const ParticleEnsemble c = random_cloud(35, 1.0 - 0.01 * i, 0.7, 7500 + i, 1.0);
    worst_tri = std::max(worst_tri,
                         bl_distance(a, c, dict) - bl_distance(a, b, dict) - bl_distance(b, c, dict));
  }
  if (worst_tri > 1e-12) ok = false;  // fp slack only; exact in real arithmetic

  // cap: capped path distance never exceeds 1 and equals 1 exactly for
  // point masses separated far beyond every dictionary function's support
  MeasurePath p, q;
  p.kind = MeasurePath::Kind::full;
  q.kind = MeasurePath::Kind::full;
  p.times = q.times = Eigen::VectorXd::Zero(1);
  p.slow_dim = q.slow_dim = 1;
  ParticleEnsemble da, db;
  da.states = Eigen::MatrixXd::Constant(1, 1, -100.0);
  db.states = Eigen::MatrixXd::Constant(1, 1, 100.0);
  da.log_weights = db.log_weights = Eigen::VectorXd::Zero(1);
  da.slow_dim = db.slow_dim = 1;
  p.ensembles.push_back(da);
  q.ensembles.push_back(db);
  if (path_distance(p, q, dict) != 1.0) ok = false;

  for (int i = 0; i < 20 && ok; ++i) {
    MeasurePath r = p, s = q;
    r.ensembles[0] = random_cloud(30, -0.3, 1.0, 7600 + i, 1.0);
    s.ensembles[0] = random_cloud(45, 0.6, 1.1, 7700 + i, 1.0);
    ok = path_distance(r, s, dict) <= 1.0;
  }
  return {ok, "identity 0.0, symmetry bitwise, 100 triangles (slack 1e-12, worst " +
                  fmt(worst_tri) + "), cap 1.0 exact at separated masses"};
}

// ---------------------------------------------------------------------------
// C8: converge artifacts are byte-identical across reruns (and worker counts).
Outcome c8_determinism() {
  const std::string text =
      "[run]\nmodel = ou-linear\nseed = 11\n"
      "[sim]\nT = 0.5\n"
      "[grid]\nlo = -4\nhi = 4\ncount = 17\n"
      "[avg]\nsource = analytic\n"
      "[converge]\neps_list = 0.5, 0.35\nreplications = 5\nparticles = 200\n"
      "store_cap = 16\ndict_size = 32\n";
  const Config cfg = Config::from_string(text);
  const fs::path base = fs::temp_directory_path() / "msf_acceptance";
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  std::vector<std::string> reports;
  for (int run = 0; run < 3; ++run) {
    const fs::path dir = base / ("run" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    CliOverrides ov;
    ov.out_dir = dir.string();
    ov.workers = run == 2 ? 3 : 1;  // the third run checks worker invariance
    if (run_cli("converge", cfg, ov) != 0) return {false, "converge exited nonzero"};
    reports.push_back(slurp(dir / "report.csv"));
  }
  const bool pass =
      !reports[0].empty() && reports[0] == reports[1] && reports[0] == reports[2];
  return {pass, pass ? "report.csv byte-identical across 2 reruns and workers 1/3"
                     : "report.csv bytes differ between runs"};
}

}  // namespace

int main() {
  std::printf("== acceptance: 8 primary criteria ==\n");

  run_criterion("C1", "semigroup vs OU closed form", c1_semigroup);
  run_criterion("C2", "cell problem vs linear solution", c2_poisson);
  run_criterion("C3", "averaged coefficients", c3_averaged);
  run_criterion("C4", "filters vs Kalman-Bucy oracles", c4_filter_oracle);

  // C5 and C6 share one Monte Carlo averaged model for ou-decay (no closed
  // form for atilde exists there); build it once with a documented budget.
  const MultiscaleModel decay = find_model("ou-decay").make();
  AveragedModel decay_avg;
  std::string build_err;
  {
    const auto t0 = std::chrono::steady_clock::now();
    AveragingParams apar;
    apar.stationary.n_samples = 1280;
    apar.stationary.thin_time = 0.4;
    apar.stationary.burn_in_time = 6.0;
    apar.poisson.t_max = 12.0;
    apar.poisson.dt = 0.01;
    apar.poisson.path_pairs = 32;
    apar.coeff_samples = 512;
    try {
      decay_avg = build_averaged_model(decay, grid1d(-4.0, 4.0, 17), apar, 4040);
    } catch (const std::exception& e) {
      build_err = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("-- shared ou-decay averaged model: grid [-4,4]/17, 1280 thinned samples, "
                "32 path pairs, dt 0.01%s  [%.1fs]\n",
                build_err.empty() ? "" : (" BUILD FAILED: " + build_err).c_str(), secs);
  }
  run_criterion("C5", "unit-mean filter mass", [&]() -> Outcome {
    if (!build_err.empty()) return {false, "averaged model build failed"};
    return c5_mass(decay, decay_avg);
  });
  run_criterion("C6", "eps sweep distance trend", [&]() -> Outcome {
    if (!build_err.empty()) return {false, "averaged model build failed"};
    return c6_trend(decay, decay_avg);
  });

  run_criterion("C7", "metric surrogate properties", c7_metric);
  run_criterion("C8", "converge artifact determinism", c8_determinism);

  std::printf("== %d/8 passed ==\n", 8 - g_failures);
  return g_failures;
}
