#pragma once

#include <stdexcept>
#include <string>

namespace bdqsd {

/// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kValidation,  // bad input: config, schema, domain of an operation
  kNumerical,   // non-convergence, no survivors, overflow, underflow
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Operation called outside its domain (non-interior state, N < r, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

/// Config or model construction rejected.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

/// A rate evaluated to a non-finite value.
class OverflowError : public Error {
 public:
  explicit OverflowError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

class IterationLimitError : public NumericalError {
 public:
  IterationLimitError(const std::string& what, double last_residual)
      : NumericalError(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class NoSurvivorError : public NumericalError {
 public:
  explicit NoSurvivorError(const std::string& what) : NumericalError(what) {}
  double survival_estimate() const noexcept { return 0.0; }
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace bdqsd
