#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bullseye {

enum class ErrorKind {
  InvalidGeometry,
  FeatureUnderresolved,
  OutOfDispersionRange,
  InvalidArgument,
  NumericalBlowup,
  NoResonance,
  DegenerateField,
  PlaneInsidePML,
  ConfigError,
  EmptyStream,
  InsufficientWindow,
  NoConvergence,
  SingularNormalMatrix,
  DegenerateData,
  WindowOutOfRange,
  ZeroTotalRate,
  InvalidR,
  NonSaturatingData,
  EmptyGroup,
  ConfigInvalid,
  IoFailure,
  UsageError,
};

std::string_view to_string(ErrorKind kind);

/// Every module reports failures through this type; `kind()` is what the
/// CLI serializes into error.json.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bullseye
