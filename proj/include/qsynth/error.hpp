#pragma once

#include <stdexcept>
#include <string>

namespace qsynth {

enum class ErrorCode {
  InvalidArgument,
  Model,
  Infeasible,
  Solver,
  Io,
  HashMismatch,
};

/// Base exception for all library failures. The C API maps `code()` onto
/// its integer status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qsynth
