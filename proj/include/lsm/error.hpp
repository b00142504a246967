#pragma once

#include <stdexcept>
#include <string>

namespace lsm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command-line usage or an invalid configuration value.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (parse failures, misaligned grids,
/// empty inventories, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to converge or hit a singular configuration.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsm
