#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpc {

/// Error categories double as CLI exit codes.
enum class ErrorCategory : int {
  kInternal = 1,
  kConfig = 2,
  kIo = 3,
  kNumerical = 4,
  kContract = 5,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kNumerical: return "numerical";
    case ErrorCategory::kContract: return "contract";
    case ErrorCategory::kInternal: break;
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

/// Shape or precondition violation.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::kContract, what) {}
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// A time integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t sample, std::size_t replication, std::size_t step)
      : Error(ErrorCategory::kNumerical,
              "integration diverged at sample " + std::to_string(sample) + ", replication " +
                  std::to_string(replication) + ", step " + std::to_string(step)),
        sample_(sample),
        replication_(replication),
        step_(step) {}

  std::size_t sample() const noexcept { return sample_; }
  std::size_t replication() const noexcept { return replication_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t sample_, replication_, step_;
};

/// Gram matrix could not be factorized even after jitter escalation.
class SingularGramError : public Error {
 public:
  SingularGramError(double lambda, double condition)
      : Error(ErrorCategory::kNumerical,
              "singular gram matrix (lambda=" + std::to_string(lambda) +
                  ", condition estimate=" + std::to_string(condition) + ")"),
        lambda_(lambda),
        condition_(condition) {}

  double lambda() const noexcept { return lambda_; }
  double condition() const noexcept { return condition_; }

 private:
  double lambda_, condition_;
};

}  // namespace dpc
