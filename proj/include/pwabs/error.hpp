#pragma once

#include <stdexcept>
#include <string>

namespace pwabs {

/// Base of every error raised by the library. `kind()` is a stable tag used by
/// the CLI to map failures onto exit codes and diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define PWABS_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(tag, what) {}       \
  }

PWABS_DEFINE_ERROR(NumericalFailure, "numerical-failure");
PWABS_DEFINE_ERROR(DimensionMismatch, "dimension-mismatch");
PWABS_DEFINE_ERROR(SingularMatrix, "singular-matrix");
PWABS_DEFINE_ERROR(ThinRegion, "thin-region");
PWABS_DEFINE_ERROR(UnboundedRegion, "unbounded-region");
PWABS_DEFINE_ERROR(UndefinedDistance, "undefined-distance");
PWABS_DEFINE_ERROR(OutsideDomain, "outside-domain");
PWABS_DEFINE_ERROR(DegenerateCluster, "degenerate-cluster");
PWABS_DEFINE_ERROR(ThresholdTooTight, "threshold-too-tight");
PWABS_DEFINE_ERROR(IdentificationCollapse, "identification-collapse");
PWABS_DEFINE_ERROR(UndeclaredAtom, "undeclared-atom");
PWABS_DEFINE_ERROR(UnsupportedFragment, "unsupported-fragment");
PWABS_DEFINE_ERROR(PreconditionViolation, "precondition-violation");
PWABS_DEFINE_ERROR(ConfigError, "config-error");
PWABS_DEFINE_ERROR(FormatError, "format-error");

#undef PWABS_DEFINE_ERROR

/// LTL syntax error; `column` is 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int column)
      : Error("syntax-error", what + " at column " + std::to_string(column)),
        column_(column) {}
  int column() const noexcept { return column_; }

 private:
  int column_;
};

}  // namespace pwabs
