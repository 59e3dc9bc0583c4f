#pragma once

#include <stdexcept>
#include <string>

namespace pcrnn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or non-physical input parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Local constitutive integration failed (radial return did not converge).
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Random path generation could not satisfy its constraints.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Singular or otherwise unusable linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Global Newton solve failed after step refinement.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A macro step index exceeds the surrogate's sequence length.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent file artifact.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcrnn
