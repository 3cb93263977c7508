#pragma once

#include <stdexcept>
#include <string>

namespace phidep {

// Bad inputs: malformed data, out-of-range parameters, violated preconditions.
// The CLI maps this to exit code 2.
struct ValidationError : std::invalid_argument {
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numeric failure while computing with valid inputs (singular matrix where a
// finite result was required, failed convergence, ...). CLI exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace phidep
