#pragma once

#include <stdexcept>
#include <string>

namespace imd {

// Bad configuration or flag values. Maps to CLI exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss, failed matrix square root, garbage model outputs.
// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or unwritable files, malformed containers. Maps to exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace imd
