#pragma once

#include <stdexcept>
#include <string>

namespace assoc {

// Error categories map one-to-one onto CLI exit codes (see assoc/cli.hpp).
enum class ErrorCategory {
  argument,
  config,
  data,
  evaluation,
  convergence,
  identifiability,
  consistency,
};

const char* category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error(ErrorCategory::argument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// A non-finite linear predictor. `stratum` is the outcome level whose
// association term could not be evaluated, or -1 if unknown.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, long stratum)
      : Error(ErrorCategory::evaluation, what), stratum_(stratum) {}

  long stratum() const noexcept { return stratum_; }

 private:
  long stratum_;
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what)
      : Error(ErrorCategory::convergence, what) {}
};

// The likelihood keeps increasing along an unbounded ray: no maximizer exists.
class DivergenceError : public ConvergenceError {
 public:
  explicit DivergenceError(const std::string& what) : ConvergenceError(what) {}
};

class IdentifiabilityError : public Error {
 public:
  explicit IdentifiabilityError(const std::string& what)
      : Error(ErrorCategory::identifiability, what) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what)
      : Error(ErrorCategory::consistency, what) {}
};

}  // namespace assoc
