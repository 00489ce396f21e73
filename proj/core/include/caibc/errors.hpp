#ifndef CAIBC_ERRORS_HPP_
#define CAIBC_ERRORS_HPP_

#include <stdexcept>

namespace caibc {

// Bad configuration or arguments (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent data files (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss during optimization (CLI exit code 4).
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace caibc

#endif  // CAIBC_ERRORS_HPP_
