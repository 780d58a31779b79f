#pragma once

#include <stdexcept>
#include <string>

namespace satp {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A forward or backward pass produced NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad user input: malformed files, missing checkpoints, invalid configs.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments to an API call (contract violation by the caller).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Training loss went non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace satp
