// Error type shared by all primivox modules. Every failure carries a stable
// machine-parsable code so the CLI can emit single-line diagnostics.
#pragma once

#include <stdexcept>
#include <string>

namespace primivox {

enum class ErrorCode {
  kDomain,           // argument outside the mathematical domain of an operation
  kDimension,        // shape mismatch between paired inputs
  kDegenerateLoss,   // loss requested over an empty valid set
  kDivergence,       // optimizer produced a non-finite loss
  kUndefinedMetric,  // metric has no defined value (e.g. empty ground truth)
  kIo,               // file missing / unreadable / unwritable
  kFormat,           // malformed file contents
  kConfig,           // invalid configuration value
  kRange,            // value outside a representable range
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kDegenerateLoss: return "degenerate_loss";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kRange: return "range";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace primivox
