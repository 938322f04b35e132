#pragma once

#include <stdexcept>
#include <string>

namespace locdiff {

/// Invalid argument to a public operation (bad index, out-of-range parameter, shape mismatch).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear-algebra failure (singular factorization, non-convergent quadrature).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A reverse-sampling trajectory produced a non-finite coordinate.
class SamplingDivergedError : public std::runtime_error {
 public:
  SamplingDivergedError(std::size_t step, const std::string& what)
      : std::runtime_error("sampling diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Training produced a non-finite loss or parameter.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(std::size_t step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Configuration file problem; message carries the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage was invoked before its upstream artifacts exist.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace locdiff
