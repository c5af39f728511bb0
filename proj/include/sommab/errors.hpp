#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace sommab {

/// Invalid arm, group, or instance structure.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A precondition the caller was required to establish did not hold
/// (e.g. asking for an index on an arm that was never pulled).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A numeric argument is outside the range where a bound or parameter is
/// defined. When the violated limit is a cap on `a`, it is carried along.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<double> cap = std::nullopt)
      : std::invalid_argument(what), cap_(cap) {}

  std::optional<double> cap() const noexcept { return cap_; }

 private:
  std::optional<double> cap_;
};

/// Malformed or inconsistent configuration document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& reason)
      : std::runtime_error(path.empty() ? reason : path + ": " + reason),
        path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace sommab
