#pragma once

#include <stdexcept>
#include <string>

namespace cmc {

/// Base class for every error raised by the library. Each subclass maps onto
/// one process exit code of the `cmc` tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept = 0;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// Malformed, inconsistent or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

/// A value outside the natural-parameter domain of a family, or an invalid label.
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

/// Numerical breakdown (SVD failure, zero starting matrix, non-finite values).
class NumericalError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 4; }
};

}  // namespace cmc
