#include <benchmark/benchmark.h>

#include <cmath>

#include <Eigen/Dense>

#include "msfilter/averaging.hpp"
#include "msfilter/ensemble.hpp"
#include "msfilter/kalman.hpp"
#include "msfilter/metrics.hpp"
#include "msfilter/model.hpp"
#include "msfilter/particle_filter.hpp"
#include "msfilter/registry.hpp"
#include "msfilter/rng.hpp"
#include "msfilter/sde.hpp"

using namespace msf;

namespace {

const MultiscaleModel& linear_model() {
  static const MultiscaleModel mdl = find_model("ou-linear").make();
  return mdl;
}

const AveragedModel& linear_averaged() {
  static const AveragedModel avg = [] {
    const ModelRegistryEntry& e = find_model("ou-linear");
    const TensorGrid grid =
        TensorGrid::uniform(Eigen::VectorXd::Constant(1, -4.0), Eigen::VectorXd::Constant(1, 4.0),
                            Eigen::VectorXi::Constant(1, 33));
    return tabulate_averaged_model(e.facts.averaged, grid, 1, 1, 1e-8);
  }();
  return avg;
}

const ObservationPath& shared_obs() {
  static const ObservationPath obs = [] {
    const PathBundle truth = simulate_multiscale(linear_model(), 0.25, 1.0, 71);
    return truth.observations();
  }();
  return obs;
}

ParticleEnsemble cloud(int n, double shift, std::uint64_t seed) {
  RngStream rng = RngStream::root(seed);
  ParticleEnsemble ens;
  ens.states.resize(n, 1);
  ens.log_weights.resize(n);
  for (int i = 0; i < n; ++i) {
    ens.states(i, 0) = shift + rng.normal();
    ens.log_weights(i) = 0.3 * rng.normal();
  }
  ens.slow_dim = 1;
  return ens;
}

void BM_RngNormalFill(benchmark::State& state) {
  RngStream rng = RngStream::root(5);
  Eigen::VectorXd buf(4096);
  for (auto _ : state) {
    for (int i = 0; i < 4096; ++i) buf[i] = rng.normal();
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_RngNormalFill);

void BM_SimulateMultiscale(benchmark::State& state) {
  const MultiscaleModel& mdl = linear_model();
  const double eps = 0.25, T = 1.0;
  std::uint64_t seed = 100;
  for (auto _ : state) {
    const PathBundle path = simulate_multiscale(mdl, eps, T, seed++);
    benchmark::DoNotOptimize(path.times.size());
  }
  state.SetItemsProcessed(state.iterations() * (shared_obs().times.size() - 1));
}
BENCHMARK(BM_SimulateMultiscale);

void BM_ParticleFilterFull(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ObservationPath& obs = shared_obs();
  FilterOptions fo;
  fo.store_every = 1 << 20;
  std::uint64_t seed = 200;
  for (auto _ : state) {
    const MeasurePath mp = particle_filter_full(linear_model(), 0.25, obs, n, seed++, fo);
    benchmark::DoNotOptimize(mp.ensembles.back().total_mass);
  }
  state.SetItemsProcessed(state.iterations() * n * (obs.times.size() - 1));
}
BENCHMARK(BM_ParticleFilterFull)->Arg(256)->Arg(1024)->Arg(4096);

void BM_ParticleFilterAveraged(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ObservationPath& obs = shared_obs();
  FilterOptions fo;
  fo.store_every = 1 << 20;
  std::uint64_t seed = 300;
  for (auto _ : state) {
    const MeasurePath mp =
        particle_filter_averaged(linear_averaged(), linear_model(), obs, n, seed++, fo);
    benchmark::DoNotOptimize(mp.ensembles.back().total_mass);
  }
  state.SetItemsProcessed(state.iterations() * n * (obs.times.size() - 1));
}
BENCHMARK(BM_ParticleFilterAveraged)->Arg(256)->Arg(1024)->Arg(4096);

void BM_KalmanBucy(benchmark::State& state) {
  const LinearSpec spec = find_model("ou-linear").facts.joint_kalman(0.25);
  const ObservationPath& obs = shared_obs();
  for (auto _ : state) {
    const MeasurePath mp = kalman_bucy(spec, obs);
    benchmark::DoNotOptimize(mp.gaussians.back().mean(0));
  }
  state.SetItemsProcessed(state.iterations() * (obs.times.size() - 1));
}
BENCHMARK(BM_KalmanBucy);

void BM_BlDistance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const TestDictionary dict = TestDictionary::make(1, 64, 97);
  const ParticleEnsemble a = cloud(n, -0.3, 11);
  const ParticleEnsemble b = cloud(n, 0.4, 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bl_distance(a, b, dict));
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * 64);
}
BENCHMARK(BM_BlDistance)->Arg(500)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
