#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace probekit {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on an argument or configuration value was violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Model or schema specification is structurally invalid (e.g. zero hidden layers).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Label or output arity does not match what the operation needs.
class ArityError : public Error {
 public:
  using Error::Error;
};

/// A raw value could not be encoded under the schema.
class EncodingError : public Error {
 public:
  EncodingError(const std::string& what, std::size_t row, std::string column)
      : Error(what), row_(row), column_(std::move(column)) {}

  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// A linear system that must be full rank is not.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Gradient requested from a model or energy that has none.
class NotDifferentiableError : public Error {
 public:
  using Error::Error;
};

/// SMO did not reach the KKT tolerance within its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double max_violation)
      : Error(what), max_violation_(max_violation) {}
  double max_violation() const { return max_violation_; }

 private:
  double max_violation_;
};

/// Training loss became non-finite.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Malformed file content or failed I/O.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace probekit
