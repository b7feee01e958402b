#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsdbg {

// Stable error codes. The protocol and CLI expose code_name() verbatim, so
// renaming an entry is a wire-format change.
enum class ErrorCode {
  SyntaxError,
  UnresolvedLabel,
  UnresolvedCall,
  UnknownGlobal,
  DuplicateFunction,
  InvalidProgram,
  MalformedImage,
  AlreadyInstrumented,
  UnknownFunction,
  UnresolvableLocation,
  UnknownTarget,
  PositionNotReached,
  UnknownBookmark,
  UnknownBreakpoint,
  BudgetExhausted,
  NotRunning,
  NoWritesBeforeS,
  NotMonotoneAtEndpoints,
  TimestampUnreachable,
  BadExpression,
  BadMessage,
  UnknownCommand,
  BadArguments,
  Io,
};

std::string_view code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace tsdbg
