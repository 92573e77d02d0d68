#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace csipred {

using cdouble = std::complex<double>;

/// Invalid configuration or malformed input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Runtime failure (I/O, numerical abort). The CLI maps this to exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace csipred
