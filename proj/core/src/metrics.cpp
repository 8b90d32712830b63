#include "msfilter/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "msfilter/errors.hpp"
#include "msfilter/rng.hpp"

namespace msf {

double BLFunction::operator()(const Eigen::VectorXd& x) const {
  switch (kind) {
    case Kind::gauss: {
      const double q = (x - center).squaredNorm() / (2.0 * scale * scale);
      return std::exp(-q);
    }
    case Kind::ridge:
      return std::tanh(scale * (center.dot(x) - offset));
    case Kind::constant:
      return scale;
  }
  return 0.0;
}

TestDictionary TestDictionary::make(int dim, int size, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("dictionary dimension must be positive");
  if (size < 32) throw ConfigError("dictionary size must be at least 32");
  TestDictionary dict;
  dict.dim = dim;
  dict.seed = seed;
  dict.functions.reserve(static_cast<std::size_t>(size));
  RngStream rng = RngStream::root(seed).child(stream_id::dictionary);

  BLFunction c1;
  c1.kind = BLFunction::Kind::constant;
  c1.scale = 1.0;
  dict.functions.push_back(c1);
  BLFunction c2 = c1;
  c2.scale = 0.5;
  dict.functions.push_back(c2);

  const int rest = size - 2;
  const int n_gauss = rest / 2;
  for (int j = 0; j < rest; ++j) {
    BLFunction f;
    f.center.resize(dim);
    rng.fill_normal(f.center);
    if (j < n_gauss) {
      f.kind = BLFunction::Kind::gauss;
      f.center *= 1.5;
      // width in [0.65, 3]: peak slope e^{-1/2}/lambda <= 0.933
      f.scale = 0.65 + 2.35 * rng.uniform();
    } else {
      f.kind = BLFunction::Kind::ridge;
      double nrm = f.center.norm();
      if (nrm < 1e-12) {
        f.center.setZero();
        f.center[0] = 1.0;
        nrm = 1.0;
      }
      f.center /= nrm;
      f.scale = 0.3 + 0.7 * rng.uniform();  // Lipschitz constant = steepness
      f.offset = 1.5 * rng.normal();
    }
    dict.functions.push_back(f);
  }
  return dict;
}

void TestDictionary::probe_bounds(const std::vector<Eigen::VectorXd>& probes, double* max_abs,
                                  double* max_slope) const {
  double ma = 0.0, ms = 0.0;
  for (const BLFunction& f : functions) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double fi = f(probes[i]);
      ma = std::max(ma, std::abs(fi));
      for (std::size_t j = i + 1; j < probes.size(); ++j) {
        const double dx = (probes[i] - probes[j]).norm();
        if (dx < 1e-12) continue;
        ms = std::max(ms, std::abs(fi - f(probes[j])) / dx);
      }
    }
  }
  if (max_abs) *max_abs = ma;
  if (max_slope) *max_slope = ms;
}

namespace {

Eigen::VectorXd measure_weights(const ParticleEnsemble& ens) {
  return ens.normalized ? ens.weights : normalized_weights(ens.log_weights);
}

// Sum of w_i phi(x_i) over the leading `dim` state columns, in row order.
// Every route into the metric funnels through this accumulation, which is
// what makes the symmetry and signed-measure identities exact.
double dict_sum(const BLFunction& f, const Eigen::MatrixXd& states, const Eigen::VectorXd& w,
                int dim) {
  double acc = 0.0;
  Eigen::VectorXd x(dim);
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    x = states.row(i).head(dim);
    acc += w[i] * f(x);
  }
  return acc;
}

void check_dims(const ParticleEnsemble& mu, const ParticleEnsemble& nu,
                const TestDictionary& dict) {
  if (mu.dim() < dict.dim || nu.dim() < dict.dim) {
    throw ConfigError("ensemble dimension is smaller than the dictionary dimension");
  }
}

}  // namespace

double bl_distance(const ParticleEnsemble& mu, const ParticleEnsemble& nu,
                   const TestDictionary& dict) {
  check_dims(mu, nu, dict);
  const Eigen::VectorXd wa = measure_weights(mu);
  const Eigen::VectorXd wb = measure_weights(nu);
  double best = 0.0;
  for (const BLFunction& f : dict.functions) {
    const double a = dict_sum(f, mu.states, wa, dict.dim);
    const double b = dict_sum(f, nu.states, wb, dict.dim);
    best = std::max(best, std::abs(a - b));
  }
  return best;
}

double bl_distance_signed(const ParticleEnsemble& mu, const ParticleEnsemble& nu,
                          const TestDictionary& dict) {
  check_dims(mu, nu, dict);
  const Eigen::VectorXd wa = measure_weights(mu);
  const Eigen::VectorXd wb = measure_weights(nu);
  double best = 0.0;
  for (const BLFunction& f : dict.functions) {
    // walk the atoms of the signed measure mu - nu, accumulating the positive
    // and negative parts separately in encounter order
    double pos = 0.0, neg = 0.0;
    Eigen::VectorXd x(dict.dim);
    for (Eigen::Index i = 0; i < mu.states.rows(); ++i) {
      x = mu.states.row(i).head(dict.dim);
      pos += wa[i] * f(x);
    }
    for (Eigen::Index i = 0; i < nu.states.rows(); ++i) {
      x = nu.states.row(i).head(dict.dim);
      neg += wb[i] * f(x);
    }
    best = std::max(best, std::abs(pos - neg));
  }
  return best;
}

namespace {

void check_paths(const MeasurePath& p, const MeasurePath& q) {
  if (p.times.size() != q.times.size()) throw GridMismatch("measure paths have different lengths");
  for (Eigen::Index k = 0; k < p.times.size(); ++k) {
    if (p.times[k] != q.times[k]) throw GridMismatch("measure paths disagree on the time grid");
  }
  if (p.ensembles.size() != static_cast<std::size_t>(p.times.size()) ||
      q.ensembles.size() != static_cast<std::size_t>(q.times.size())) {
    throw GridMismatch("measure path does not store an ensemble at every grid time");
  }
}

}  // namespace

double path_distance(const MeasurePath& p, const MeasurePath& q, const TestDictionary& dict) {
  check_paths(p, q);
  double sup = 0.0;
  for (std::size_t k = 0; k < p.ensembles.size(); ++k) {
    sup = std::max(sup, bl_distance(p.ensembles[k], q.ensembles[k], dict));
  }
  return std::min(1.0, sup);
}

double unnormalized_path_distance(const MeasurePath& p, const MeasurePath& q,
                                  const TestDictionary& dict) {
  check_paths(p, q);
  double sup = 0.0;
  for (std::size_t k = 0; k < p.ensembles.size(); ++k) {
    const ParticleEnsemble& mu = p.ensembles[k];
    const ParticleEnsemble& nu = q.ensembles[k];
    check_dims(mu, nu, dict);
    const Eigen::VectorXd wa = measure_weights(mu);
    const Eigen::VectorXd wb = measure_weights(nu);
    for (const BLFunction& f : dict.functions) {
      const double a = mu.total_mass * dict_sum(f, mu.states, wa, dict.dim);
      const double b = nu.total_mass * dict_sum(f, nu.states, wb, dict.dim);
      sup = std::max(sup, std::abs(a - b));
    }
  }
  return sup;
}

}  // namespace msf
