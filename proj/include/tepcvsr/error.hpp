#pragma once

#include <stdexcept>
#include <string>

namespace tepcvsr {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Input that parses but violates a domain rule (bad reactance, missing slack, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Internal inconsistency while assembling a model.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Backend missing, crashed, or returned something unusable.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// The time limit expired before any feasible point was found.
class TimeLimitError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// A post-solve audit found a solution that violates the linearization or big-M assumptions.
class AuditError : public Error {
 public:
  using Error::Error;
};

}  // namespace tepcvsr
