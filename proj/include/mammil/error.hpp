#pragma once

#include <stdexcept>
#include <string>

namespace mammil {

/// Base class for every error the engine raises. Each subclass maps onto one
/// process exit code used by the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values, inconsistent configs, contract violations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Truncated or oversized payloads.
class LengthError : public FormatError {
 public:
  LengthError(const std::string& what, std::size_t expected, std::size_t actual)
      : FormatError(what + " (expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(actual) + ")"),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// A metric that is not defined for the given inputs (e.g. AUC with one class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace mammil
