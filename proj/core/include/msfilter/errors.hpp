#pragma once

#include <stdexcept>
#include <string>

namespace msf {

// Base for all msfilter failures. Subtypes mirror the failure modes of the
// numerical pipeline so callers can map them to exit codes / retries.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Correlation / factorization
struct NonPositiveDefinite : Error { using Error::Error; };
struct FactorizationFailure : Error { using Error::Error; };

// Simulation
struct StepTooCoarse : Error { using Error::Error; };
struct NumericalBlowup : Error { using Error::Error; };

// Averaging
struct PSDViolation : Error { using Error::Error; };

// Filtering
struct WeightCollapse : Error { using Error::Error; };
struct GridEscape : Error { using Error::Error; };
struct CovarianceBlowup : Error { using Error::Error; };
struct ZeroMass : Error { using Error::Error; };

// Metrics
struct GridMismatch : Error { using Error::Error; };

// CLI / configuration
struct ConfigError : Error { using Error::Error; };

}  // namespace msf
