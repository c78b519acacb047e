#pragma once

// Error taxonomy shared by the whole library.
//
//  - ConfigError:    invalid arguments, malformed inputs, dimension mismatch.
//                    The CLI maps these to exit code 1.
//  - NumericalError: iteration budgets exhausted, failed certificates,
//                    non-finite intermediates. The CLI maps these to exit 2.

#include <stdexcept>
#include <string>

namespace ccmdp {

struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ccmdp
