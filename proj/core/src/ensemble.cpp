#include "msfilter/ensemble.hpp"

#include <cmath>
#include <limits>

#include "msfilter/errors.hpp"

namespace msf {

double log_mean_weight(const Eigen::VectorXd& log_weights) {
  const double mx = log_weights.maxCoeff();
  if (!std::isfinite(mx)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (Eigen::Index i = 0; i < log_weights.size(); ++i) s += std::exp(log_weights[i] - mx);
  return mx + std::log(s / static_cast<double>(log_weights.size()));
}

Eigen::VectorXd normalized_weights(const Eigen::VectorXd& log_weights) {
  const Eigen::Index n = log_weights.size();
  if (n == 0) throw ZeroMass("empty ensemble");
  const double mx = log_weights.maxCoeff();
  if (!std::isfinite(mx)) throw ZeroMass("all log-weights are -inf");
  Eigen::VectorXd w(n);
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = std::exp(log_weights[i] - mx);
    s += w[i];
  }
  if (!(s > 0.0) || !std::isfinite(s)) throw ZeroMass("weight sum is not positive");
  w /= s;
  // Make the plain left-to-right sum exactly 1.0. First fold the residual
  // into the largest weight (usually exact after one pass and keeps the
  // perturbation where it is relatively smallest). When folding stalls, set
  // the final weight to the exact complement of the prefix: for prefix S in
  // (0, 2], fl(S + fl(1 - S)) == 1.0 (Sterbenz for S >= 1/2, half-ulp
  // rounding below), so the construction cannot miss. A prefix above 1 would
  // force a negative tail; shaving the largest prefix entry first restores
  // nonnegativity.
  Eigen::Index imax = 0;
  w.maxCoeff(&imax);
  const auto total_of = [&w, n]() {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += w[i];
    return total;
  };
  double total = total_of();
  for (int pass = 0; pass < 8 && total != 1.0; ++pass) {
    w[imax] += 1.0 - total;
    total = total_of();
  }
  for (int pass = 0; pass < 64 && total != 1.0; ++pass) {
    double prefix = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) prefix += w[i];
    const double tail = 1.0 - prefix;
    if (tail >= 0.0) {
      w[n - 1] = tail;
      total = total_of();
      break;
    }
    Eigen::Index jmax = 0;
    w.head(n - 1).maxCoeff(&jmax);
    w[jmax] = std::max(0.0, w[jmax] + tail);
    total = total_of();
  }
  if (total != 1.0) throw FactorizationFailure("weight normalization cannot reach a unit sum");
  return w;
}

ParticleEnsemble normalize(const ParticleEnsemble& ens) {
  ParticleEnsemble out = ens;
  out.weights = normalized_weights(ens.log_weights);
  const double lse = log_mean_weight(ens.log_weights) +
                     std::log(static_cast<double>(ens.log_weights.size()));
  out.log_weights.array() -= lse;
  out.normalized = true;
  return out;
}

namespace {

Eigen::VectorXd effective_weights(const ParticleEnsemble& ens) {
  return ens.normalized ? ens.weights : normalized_weights(ens.log_weights);
}

}  // namespace

double ess(const ParticleEnsemble& ens) {
  const Eigen::VectorXd w = effective_weights(ens);
  return 1.0 / w.squaredNorm();
}

double expectation(const ParticleEnsemble& ens,
                   const std::function<double(const Eigen::VectorXd&)>& phi) {
  const Eigen::VectorXd w = effective_weights(ens);
  double acc = 0.0;
  Eigen::VectorXd row(ens.dim());
  for (int i = 0; i < ens.size(); ++i) {
    row = ens.states.row(i);
    acc += w[i] * phi(row);
  }
  return acc;
}

double integrate_unnormalized(const ParticleEnsemble& ens,
                              const std::function<double(const Eigen::VectorXd&)>& phi) {
  return ens.total_mass * expectation(ens, phi);
}

Eigen::VectorXd slow_mean(const ParticleEnsemble& ens) {
  const Eigen::VectorXd w = effective_weights(ens);
  // accumulated per particle in the same shape as expectation(), so the
  // scalar identity slow_mean[j] == expectation(phi = row[j]) is bitwise
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(ens.slow_dim);
  for (int i = 0; i < ens.size(); ++i) {
    for (int j = 0; j < ens.slow_dim; ++j) mu[j] += w[i] * ens.states(i, j);
  }
  return mu;
}

Eigen::VectorXd slow_variance(const ParticleEnsemble& ens) {
  const Eigen::VectorXd w = effective_weights(ens);
  const Eigen::VectorXd mu = ens.states.leftCols(ens.slow_dim).transpose() * w;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(ens.slow_dim);
  for (int i = 0; i < ens.size(); ++i) {
    const auto dev = ens.states.row(i).head(ens.slow_dim).transpose() - mu;
    var += w[i] * dev.cwiseProduct(dev);
  }
  return var;
}

ParticleEnsemble slow_marginal(const ParticleEnsemble& ens) {
  ParticleEnsemble out;
  out.states = ens.states.leftCols(ens.slow_dim);
  out.log_weights = ens.log_weights;
  out.t = ens.t;
  out.total_mass = ens.total_mass;
  out.slow_dim = ens.slow_dim;
  out.normalized = ens.normalized;
  out.weights = ens.weights;
  return out;
}

void systematic_resample(ParticleEnsemble& ens, RngStream& rng) {
  systematic_resample(ens, 1.0 - rng.uniform());  // uniform() is (0,1], so this is [0,1)
}

void systematic_resample(ParticleEnsemble& ens, double offset) {
  const int n = ens.size();
  const Eigen::VectorXd w = effective_weights(ens);
  Eigen::MatrixXd picked(n, ens.dim());
  double cum = 0.0;
  int j = 0;
  for (int i = 0; i < n; ++i) {
    cum += w[i];
    while (j < n && (offset + j) / static_cast<double>(n) < cum) {
      picked.row(j) = ens.states.row(i);
      ++j;
    }
  }
  while (j < n) {  // guard against cum < 1 from rounding at the tail
    picked.row(j) = ens.states.row(n - 1);
    ++j;
  }
  ens.states.swap(picked);
  ens.log_weights.setZero();
  ens.normalized = false;
  ens.weights.resize(0);
}

}  // namespace msf
