#ifndef CELLFREE_ERRORS_HPP
#define CELLFREE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cellfree {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures tied to one random draw. The Monte Carlo engine catches these,
// redraws the realization and counts the event.
class RealizationError : public Error {
 public:
  using Error::Error;
};

class IllConditioned : public RealizationError {
 public:
  IllConditioned(const std::string& what, double condition)
      : RealizationError(what + " (condition estimate " + std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class SingularChannel : public RealizationError {
 public:
  using RealizationError::RealizationError;
};

class SingularSystem : public RealizationError {
 public:
  using RealizationError::RealizationError;
};

class ZeroPrecoder : public RealizationError {
 public:
  using RealizationError::RealizationError;
};

class DegeneratePrecoder : public RealizationError {
 public:
  using RealizationError::RealizationError;
};

class ZeroChannel : public RealizationError {
 public:
  using RealizationError::RealizationError;
};

/// Numerical breakdown of the feasibility solver. Never means "infeasible".
class SolverFailure : public RealizationError {
 public:
  using RealizationError::RealizationError;
};

class CycleDetected : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

class ZeroPowerEntry : public Error {
 public:
  using Error::Error;
};

class OddBitCount : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& field, const std::string& message)
      : Error("line " + std::to_string(line) + (field.empty() ? "" : " [" + field + "]") + ": " + message),
        line_(line),
        field_(field) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// A whole run was rejected, e.g. too many realizations had to be redrawn.
class RunFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace cellfree

#endif  // CELLFREE_ERRORS_HPP
