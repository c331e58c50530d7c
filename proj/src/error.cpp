#include "bullseye/error.hpp"

namespace bullseye {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGeometry: return "InvalidGeometry";
    case ErrorKind::FeatureUnderresolved: return "FeatureUnderresolved";
    case ErrorKind::OutOfDispersionRange: return "OutOfDispersionRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::NoResonance: return "NoResonance";
    case ErrorKind::DegenerateField: return "DegenerateField";
    case ErrorKind::PlaneInsidePML: return "PlaneInsidePML";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::EmptyStream: return "EmptyStream";
    case ErrorKind::InsufficientWindow: return "InsufficientWindow";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorKind::ZeroTotalRate: return "ZeroTotalRate";
    case ErrorKind::InvalidR: return "InvalidR";
    case ErrorKind::NonSaturatingData: return "NonSaturatingData";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

}  // namespace bullseye
