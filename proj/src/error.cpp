#include "specdraft/error.hpp"

namespace specdraft {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kInvalidConfig: return "invalid config";
    case ErrorKind::kInvalidState: return "invalid state";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kInvariantViolation: return "invariant violation";
    case ErrorKind::kUnsupportedVersion: return "unsupported version";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace specdraft
