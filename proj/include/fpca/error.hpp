#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace fpca {

// Base of every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Value outside the support or mean domain of a family.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

// Observation set invariant or coverage violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class SingularDesign : public Error {
 public:
  using Error::Error;
};

// IRLS could not make progress; carries the last accepted coefficients.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, Eigen::VectorXd last)
      : Error(what), last_iterate_(std::move(last)) {}
  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

// Model-level failure: saturated model, degenerate null, all starts failed, ...
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace fpca
