#pragma once

#include <stdexcept>
#include <string>

namespace willmore {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad caller input (odd grid, R <= r, wrong chart periods, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Everything below is a numerical failure on otherwise valid input.
struct NumericalError : Error {
  using Error::Error;
};

struct ImmersionDegenerate : NumericalError {
  using NumericalError::NumericalError;
};

struct InversionSingularity : NumericalError {
  using NumericalError::NumericalError;
};

struct PoleSingularity : NumericalError {
  using NumericalError::NumericalError;
};

struct FocalRadiusExceeded : NumericalError {
  using NumericalError::NumericalError;
};

struct NotInNeighborhood : NumericalError {
  using NumericalError::NumericalError;
};

struct NoConvergence : NumericalError {
  using NumericalError::NumericalError;
};

struct StepCollapse : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace willmore
