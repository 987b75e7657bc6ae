#pragma once

#include <stdexcept>
#include <string>

namespace flood {

// Error taxonomy shared across the library. The CLI maps these onto
// distinct exit codes, so keep the categories coarse.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: architecture, labels, flood level, split sizes.
struct InvalidSpecError : Error {
  using Error::Error;
};

// Dimension mismatch between tensors that must be congruent.
struct ShapeError : Error {
  using Error::Error;
};

// NaN/Inf where finite values are required.
struct NumericError : Error {
  using Error::Error;
};

// File system and format failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace flood
