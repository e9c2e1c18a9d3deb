#pragma once

#include <stdexcept>
#include <string>

namespace qifsnn {

enum class ErrorKind {
  InvalidParams,
  NegativeDiscriminant,
  ShapeMismatch,
  NonFiniteValue,
  NumericalError,
  MissingRunningStats,
  IncompleteRecord,
  InvalidRate,
  UnsupportedLayer,
  IndexOutOfRange,
  MalformedHeader,
  TruncatedData,
  ConfigError,
  CheckpointMismatch,
  IoError,
};

const char* to_string(ErrorKind kind);

// Every library failure is reported through this type; `kind()` lets callers
// (and the CLI exit-code mapping) dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit codes: 2 config error, 3 data error, 4 numerical failure.
int exit_code_for(ErrorKind kind);

}  // namespace qifsnn
