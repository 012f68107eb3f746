#pragma once

#include <stdexcept>
#include <string>

namespace daps {

/// Numerical failure: truncation tail too large, series or fit did not
/// converge, tractability bound exceeded.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed configuration or file schema.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / serialization failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace daps
