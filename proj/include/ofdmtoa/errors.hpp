#pragma once

#include <stdexcept>
#include <string>

namespace ofdmtoa {

// Invalid numeric parameter (non-positive gain, bad step, mismatched sizes).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The Fisher information of the selected cell set is zero, so no finite
// variance bound exists.
class UnboundedVarianceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Satellite geometry makes the normal matrix singular or not positive definite.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration document violates the schema. `path` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace ofdmtoa
