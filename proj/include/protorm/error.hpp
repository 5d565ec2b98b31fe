#pragma once

#include <stdexcept>
#include <string>

namespace protorm {

// Base of every error the library throws. The CLI maps subclasses onto exit
// codes, so new error kinds should derive from one of the three below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or usage (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, malformed or inconsistent input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

class TruncationError : public DataError {
 public:
  using DataError::DataError;
};

class InitializationError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

// A library invariant did not hold (exit code 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace protorm
