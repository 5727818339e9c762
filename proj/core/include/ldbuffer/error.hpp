#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldb {

enum class ErrorKind {
  InvalidArgument,
  IndexOutOfRange,
  DomainError,  // rate evaluated outside the closed positive quadrant
  RangeError,   // exponent overflow guard
  NonConvergence,
  UnboundedDual,
  InfiniteCost,
  Infeasible,
  BracketExhausted,
  NoRoot,
  DriftAtQViolation,
  InfeasibleHyperplane,
  QuadrantEscape,
  RateExplosion,
  TooFewHits,
  NoInfimum,
  ParseError,
  IoError,
};

std::string_view kind_name(ErrorKind kind) noexcept;

/// Domain error carrying a machine-readable kind. The CLI maps it to exit
/// code 1 and an error JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ldb
