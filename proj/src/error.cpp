#include "qifsnn/error.hpp"

namespace qifsnn {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::NegativeDiscriminant: return "NegativeDiscriminant";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::MissingRunningStats: return "MissingRunningStats";
    case ErrorKind::IncompleteRecord: return "IncompleteRecord";
    case ErrorKind::InvalidRate: return "InvalidRate";
    case ErrorKind::UnsupportedLayer: return "UnsupportedLayer";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::TruncatedData: return "TruncatedData";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParams:
    case ErrorKind::NegativeDiscriminant:
    case ErrorKind::ConfigError:
    case ErrorKind::UnsupportedLayer:
      return 2;
    case ErrorKind::NonFiniteValue:
    case ErrorKind::NumericalError:
      return 4;
    default:
      return 3;
  }
}

}  // namespace qifsnn
