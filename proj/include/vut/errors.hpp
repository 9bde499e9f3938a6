#pragma once

#include <stdexcept>
#include <string>

namespace vut {

// Error taxonomy mirrored by the CLI exit codes: usage 2, data 3, numeric 4.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vut
