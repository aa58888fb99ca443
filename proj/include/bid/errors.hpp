#pragma once

#include <stdexcept>
#include <string>

namespace bid {

// Malformed files, bad manifests, shape mismatches between artifacts.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where the math requires finite ones (NaN loss, etc).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bid
