#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gcope {

enum class ErrorCode {
  InvalidArgument,
  MissingFile,
  IoError,
  ParseError,
  IndexOutOfRange,
  ShapeMismatch,
  DimensionMismatch,
  NonFiniteFeature,
  NonFiniteInput,
  NonFiniteActivation,
  NonFiniteUpdate,
  NoEdges,
  UnlabeledNode,
  ConvergenceFailure,
  EmptyDatasetList,
  ZeroVector,
  ZeroEmbedding,
  EmptySubset,
  EmptySplit,
  InsufficientClassSupport,
  Diverged,
  UnknownKey,
};

std::string_view error_code_name(ErrorCode code);

// Every recoverable failure in the library is reported through this type;
// callers switch on code() rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// Warnings go to stderr prefixed with "warning:"; never thrown.
void warn(const std::string& message);

}  // namespace gcope
