#include "msfilter/measure_path.hpp"

#include <cstring>
#include <istream>
#include <string>

#include "msfilter/errors.hpp"

namespace msf {

void write_filter_csv(const MeasurePath& path, std::ostream& os, const Provenance& prov) {
  write_provenance_comment(os, prov);
  const int m = path.slow_dim;
  os << "t,mass";
  for (int i = 0; i < m; ++i) os << ",mean_" << (i + 1);
  for (int i = 0; i < m; ++i) os << ",var_" << (i + 1);
  os << ",ess\n";
  for (int k = 0; k < path.size(); ++k) {
    if (path.kind == MeasurePath::Kind::kalman) {
      const GaussianState& gs = path.gaussians[k];
      os << g17(path.times[k]) << "," << g17(1.0);
      for (int i = 0; i < m; ++i) os << "," << g17(gs.mean[i]);
      for (int i = 0; i < m; ++i) os << "," << g17(gs.cov(i, i));
      os << "," << g17(0.0) << "\n";
    } else {
      const ParticleEnsemble& ens = path.ensembles[k];
      const Eigen::VectorXd mu = slow_mean(ens);
      const Eigen::VectorXd var = slow_variance(ens);
      os << g17(path.times[k]) << "," << g17(ens.total_mass);
      for (int i = 0; i < m; ++i) os << "," << g17(mu[i]);
      for (int i = 0; i < m; ++i) os << "," << g17(var[i]);
      os << "," << g17(ess(ens)) << "\n";
    }
  }
}

namespace {

constexpr char kMagic[6] = {'p', 'f', '-', 'v', '1', '\0'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("ensemble dump truncated");
  return v;
}

}  // namespace

void write_ensemble_dump(const MeasurePath& path, std::ostream& os) {
  os.write(kMagic, sizeof(kMagic));
  for (int k = 0; k < path.size(); ++k) {
    const ParticleEnsemble& ens = path.ensembles[k];
    const std::uint64_t n = ens.size(), dim = ens.dim();
    const std::uint64_t payload =
        sizeof(double) + 3 * sizeof(std::uint64_t) + sizeof(double) +
        (n * dim + n) * sizeof(double);
    put<std::uint64_t>(os, payload);
    put<double>(os, ens.t);
    put<std::uint64_t>(os, n);
    put<std::uint64_t>(os, dim);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(ens.slow_dim));
    put<double>(os, ens.total_mass);
    for (std::uint64_t i = 0; i < n; ++i)
      for (std::uint64_t j = 0; j < dim; ++j) put<double>(os, ens.states(i, j));
    for (std::uint64_t i = 0; i < n; ++i) put<double>(os, ens.log_weights[i]);
  }
}

MeasurePath read_ensemble_dump(std::istream& is) {
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("ensemble dump has wrong magic (expected pf-v1)");
  }
  MeasurePath path;
  std::vector<double> times;
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint64_t payload = get<std::uint64_t>(is);
    (void)payload;
    ParticleEnsemble ens;
    ens.t = get<double>(is);
    const std::uint64_t n = get<std::uint64_t>(is);
    const std::uint64_t dim = get<std::uint64_t>(is);
    ens.slow_dim = static_cast<int>(get<std::uint64_t>(is));
    ens.total_mass = get<double>(is);
    ens.states.resize(n, dim);
    for (std::uint64_t i = 0; i < n; ++i)
      for (std::uint64_t j = 0; j < dim; ++j) ens.states(i, j) = get<double>(is);
    ens.log_weights.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) ens.log_weights[i] = get<double>(is);
    times.push_back(ens.t);
    path.ensembles.push_back(std::move(ens));
  }
  path.times = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  path.slow_dim = path.ensembles.empty() ? 0 : path.ensembles.front().slow_dim;
  return path;
}

}  // namespace msf
