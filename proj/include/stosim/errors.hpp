#pragma once

#include <stdexcept>
#include <string>

namespace stosim {

/// Invalid configuration or argument; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Numerical failure while time-stepping.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A step produced a non-finite intermediate value.
class StepRejected : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Failure while turning traces into measurements.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested mixing product is not distinguishable from the noise floor.
class NoSidebandError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

/// Low-power fit slopes are inconsistent with a cubic nonlinearity.
class NonCubicRegimeError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

}  // namespace stosim
