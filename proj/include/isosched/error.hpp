#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isosched {

enum class ErrorCode {
  CycleDetected,
  NotComputeBearing,
  EmptyWorkload,
  EmptyInput,
  ZeroMean,
  UnsupportedKind,
  UnplacedNode,
  FinalTileUnscheduled,
  ShapeMismatch,
  SizeLimitExceeded,
  ZeroRemainingTime,
  NoVictimAvailable,
  Unschedulable,
  TableInconsistent,
  NoFeasibleRate,
  ParseError,
  InvariantError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code and a
/// module tag ("graph", "lcs", ...) so the CLI can print `[module] message`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& what)
      : std::runtime_error(what), code_(code), module_(std::move(module)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace isosched
