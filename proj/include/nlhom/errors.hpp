#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nlhom {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed numeric input (non-finite vectors, non-positive scale factors).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Schema or value problem in a configuration file; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Grid sizes and scale parameters that do not line up (M = P n, 1/eps = P).
class CommensurabilityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Coefficient fails the positivity / boundedness requirement.
class H1Error : public Error {
 public:
  using Error::Error;
};

/// Vector kernel is nonzero at a node where the scalar kernel vanishes.
class H4Error : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function, e.g. (s, A) not in the tangent bundle.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// CG met a direction of non-positive curvature; the operator is not SPD.
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Recovery-sequence projection would divide by a vector shorter than 1/2.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlhom
