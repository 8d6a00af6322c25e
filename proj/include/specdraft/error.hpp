#pragma once

#include <stdexcept>
#include <string>

namespace specdraft {

enum class ErrorKind {
  kInvalidInput,
  kInvalidArgument,
  kInvalidConfig,
  kInvalidState,
  kParse,
  kInvariantViolation,
  kUnsupportedVersion,
  kIo,
};

const char* to_string(ErrorKind kind);

// All library failures surface as this exception; `kind()` lets callers
// (notably the CLI) map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace specdraft
