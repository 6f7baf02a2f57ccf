#pragma once

#include <stdexcept>
#include <string>

namespace citeweave {

/// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, invalid configuration, violated preconditions.
/// The CLI maps this to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure while running a stage on valid input (I/O, network, numerics).
/// The CLI maps this to exit code 2.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace citeweave
