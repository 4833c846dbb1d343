#pragma once

#include <stdexcept>
#include <string>

namespace kbforge {

/// Bad input data or violated precondition (empty input, missing column, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kbforge
