#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chaoslab {

/// Malformed argument: dimension mismatch, empty input, out-of-range parameter.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation's documented precondition did not hold (e.g. non-normalised density).
class PreconditionViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Explicit time stepping would break positivity or stability.
class CflViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Truncated domain holds too much mass at its boundary.
class DomainTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact solver refused an instance above its desk-scale size guard.
class TooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters fall outside the hypotheses of a convergence theorem.
class HypothesisViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A run configuration failed validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An experiment could not establish its own preconditions and stopped.
class ExperimentAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(std::size_t step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace chaoslab
