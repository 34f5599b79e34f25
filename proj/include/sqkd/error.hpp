#pragma once

#include <stdexcept>
#include <string>

namespace sqkd {

/// Base of every exception thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid parameter or configuration value (CLI exit code 1).
struct ParameterError : Error {
  using Error::Error;
};

/// A computation could not be carried out to the required accuracy
/// (CLI exit code 2).
struct NumericalError : Error {
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ParameterError(message);
}

}  // namespace sqkd
