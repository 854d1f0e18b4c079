#pragma once

#include <stdexcept>
#include <string>

namespace mshom {

/// Raised for inconsistent inputs: bad configs, mesh/coefficient mismatches,
/// violated preconditions. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation fails numerically (solver stagnation, a
/// homogenized tensor leaving its eigenvalue bounds). The CLI maps it to exit
/// code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
[[noreturn]] inline void fail_validation(const std::string& what) { throw ValidationError(what); }
[[noreturn]] inline void fail_numerical(const std::string& what) { throw NumericalError(what); }
}  // namespace detail

}  // namespace mshom
