#pragma once

#include <stdexcept>
#include <string>

namespace statsep {

enum class ErrorKind {
  ShapeMismatch,
  InvalidGeometry,
  InvalidArgument,
  DegenerateReference,
  NearZeroModulus,
  SingularMatrix,
  DomainTooLarge,
  ZeroReferenceNorm,
  ConstantReference,
  Io,
  Config,
  NumericalAbort,
};

const char* to_string(ErrorKind kind);

// Every library failure is reported through this type; the kind lets callers
// (CLI exit codes, Python bindings) map failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace statsep
