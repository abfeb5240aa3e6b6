#pragma once

#include <stdexcept>
#include <string>

namespace renfdi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing or inconsistent data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A construction certificate of the filter parameterization did not hold.
/// Seeing this means a bug in the parameter map, not a bad parameter vector.
class CertificateError : public Error {
 public:
  using Error::Error;
};

/// Optimization diverged (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace renfdi
