#pragma once

#include <stdexcept>

namespace flc {

// Malformed or inconsistent compressed payloads.
struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problems with data files (IDX parsing, dataset consistency).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration keys or values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values produced during a run.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flc
