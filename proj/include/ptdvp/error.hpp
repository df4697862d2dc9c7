#pragma once

#include <stdexcept>
#include <string>

namespace ptdvp {

/// Invalid user input: bad configuration, inconsistent shapes, contract violations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor shapes that do not line up.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A computation that cannot proceed (zero state, non-finite data, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of the neighbor message layer.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

inline void require_shape(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

}  // namespace detail
}  // namespace ptdvp
