#pragma once

#include <functional>
#include <string>
#include <vector>

#include "msfilter/averaging.hpp"
#include "msfilter/kalman.hpp"
#include "msfilter/model.hpp"

namespace msf {

// Closed-form facts a registry model vouches for. Every declared fact is
// exercised by at least one test. All averaged quantities refer to the
// whitened model (the form the filters consume), so observation-derived
// entries carry the 1/kappa factor.
struct AnalyticFacts {
  // frozen-fast stationary moments at slow state x
  bool has_stationary = false;
  std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& mean, Eigen::VectorXd& var)>
      stationary_moments;

  // full set of averaged coefficients (bbar, btilde, hbar, abar, atilde, sigbar)
  bool has_averaged = false;
  AnalyticAveraged averaged;

  // only the cell-problem-free coefficients (bbar, hbar, abar, sigbar) are
  // closed-form; btilde/atilde are zeroed placeholders, not oracle values
  bool has_averaged_means = false;
  AnalyticAveraged averaged_means;

  // exact joint linear-Gaussian system over (x, z) for the Kalman-Bucy oracle
  bool has_joint_kalman = false;
  std::function<LinearSpec(double eps)> joint_kalman;

  // exact averaged linear-Gaussian system over x
  bool has_averaged_kalman = false;
  std::function<LinearSpec()> averaged_kalman;
};

struct ModelRegistryEntry {
  std::string name;
  std::string description;
  // which structural hypotheses (fast-drift dissipativity, fast-noise
  // ellipticity, intermediate-drift decay, centering) the model satisfies
  std::string hypothesis_notes;
  std::function<MultiscaleModel()> make_raw;
  AnalyticFacts facts;

  // raw model with observation whitening applied
  MultiscaleModel make() const;
};

const std::vector<ModelRegistryEntry>& model_registry();

// Throws ConfigError listing the known names when `name` is absent.
const ModelRegistryEntry& find_model(const std::string& name);

}  // namespace msf
