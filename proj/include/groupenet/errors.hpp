#pragma once

#include <stdexcept>
#include <string>

namespace groupenet {

// Thrown when inputs violate a documented precondition (shapes, ranges, flags).
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a computation fails numerically (singular systems, divergence,
// non-finite intermediates).
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace groupenet
