#pragma once

#include <stdexcept>
#include <string>

namespace gramsyn {

// Every failure mode carries a kind so callers (and the CLI exit-code map)
// can dispatch without string matching.
enum class ErrorKind {
  Syntax,
  UnknownIdentifier,
  Arity,
  Domain,
  NonFinite,
  Schema,
  InconsistentDimensions,
  GridMismatch,
  NotInRange,
  SingularGramian,
  NotConverged,
  NotGeneralModel,
  NotAdmissible,
  EmptyAdmissibleSet,
  UndefinedBound,
  MaxOuterIterations,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

const char* error_kind_name(ErrorKind kind);

}  // namespace gramsyn
