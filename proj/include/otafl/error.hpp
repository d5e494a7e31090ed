#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace otafl {

/// Invalid dimensions, out-of-range parameters or a malformed experiment config.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (e.g. spending energy a user does not have).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Least-squares system without a unique solution.
class RankDeficiencyError : public std::runtime_error {
 public:
  RankDeficiencyError(const std::string& what, std::vector<int> users)
      : std::runtime_error(what), users_(std::move(users)) {}

  const std::vector<int>& users() const noexcept { return users_; }

 private:
  std::vector<int> users_;
};

/// An iterative numerical estimate failed to converge.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otafl
