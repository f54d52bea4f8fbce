#pragma once

#include <stdexcept>
#include <string>

namespace gibbs {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File system or transport failure (CLI exit code 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A file does not follow the expected binary layout (bad magic, bad header).
struct FormatError : IoError {
  using IoError::IoError;
};

/// Two files that must describe the same records disagree.
struct ConsistencyError : IoError {
  using IoError::IoError;
};

/// A file ends before its header says it should.
struct LengthError : IoError {
  using IoError::IoError;
};

/// Operand shapes do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A theory quantity is evaluated outside its domain (CLI exit code 4).
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, double beta)
      : std::domain_error(what), beta_(beta) {}
  explicit DomainError(const std::string& what)
      : std::domain_error(what), beta_(0.0) {}

  /// Inverse temperature at which the failure was detected (0 if not applicable).
  double beta() const noexcept { return beta_; }

 private:
  double beta_;
};

}  // namespace gibbs
