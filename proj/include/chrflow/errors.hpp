#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chr {

/// Argument or configuration outside the admitted range.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation of a density outside its domain (e.g. log of a non-positive
/// concentration). Carries the offending node when known.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what, long node = -1)
      : std::domain_error(what), node_(node) {}
  long node() const { return node_; }

 private:
  long node_;
};

/// Exponent overflow guard for the Butler-Volmer rate.
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Iterative or linear solver failure. `history` holds the per-iteration
/// residuals (or contraction ratios for Picard).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual,
              std::vector<double> history = {})
      : std::runtime_error(what), residual_(residual), history_(std::move(history)) {}
  double residual() const { return residual_; }
  const std::vector<double>& history() const { return history_; }

 private:
  double residual_;
  std::vector<double> history_;
};

/// Configuration error naming the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace chr
