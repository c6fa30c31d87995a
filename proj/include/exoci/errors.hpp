#pragma once

#include <stdexcept>
#include <string>

namespace exoci {

// Every failure mode the library reports. The CLI maps these to process
// exit codes, so the set is part of the external interface.
enum class ErrorKind {
  parse_error = 2,
  unbalanced_panel = 3,
  duplicate_cell = 4,
  degenerate_design = 5,
  zero_residual_variance = 6,
  no_finite_solution = 7,
  non_finite_knot = 8,
  negative_even_knot = 9,
  quadrature_failure = 10,
  optimizer_failure = 11,
  grid_mismatch = 12,
  io_error = 13,
  invalid_argument = 14,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace exoci
