#pragma once

#include <stdexcept>
#include <string>

namespace dagtune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: configurations, specs, expressions, priors.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// On-disk trace cannot be trusted.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Optimizer or factorization failed to produce finite numbers.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The evaluated system failed too many times in a row.
class EnvAbortError : public Error {
 public:
  using Error::Error;
};

}  // namespace dagtune
