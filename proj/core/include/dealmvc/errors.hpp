#pragma once

#include <stdexcept>
#include <string>

namespace dealmvc {

// Error kinds surfaced by the library. The CLI maps data/shape problems to
// exit code 3 and numeric failures to exit code 4.
enum class ErrorKind {
  MismatchedRows,
  EmptyView,
  LabelOutOfRange,
  InvalidShape,
  BatchTooSmall,
  ShapeMismatch,
  InvalidDistribution,
  InvalidThreshold,
  InvalidInput,
  ZeroNormRow,
  TooFewViews,
  LengthMismatch,
  EmptyInput,
  DegenerateWeights,
  NonFiniteLoss,
  UntrainedModel,
  MissingDataset,
  MissingCheckpoint,
  IOFailure,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MismatchedRows: return "MismatchedRows";
    case ErrorKind::EmptyView: return "EmptyView";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::InvalidThreshold: return "InvalidThreshold";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ZeroNormRow: return "ZeroNormRow";
    case ErrorKind::TooFewViews: return "TooFewViews";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::UntrainedModel: return "UntrainedModel";
    case ErrorKind::MissingDataset: return "MissingDataset";
    case ErrorKind::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::IOFailure: return "IOFailure";
  }
  return "UnknownError";
}

inline bool is_numeric_error(ErrorKind kind) {
  return kind == ErrorKind::NonFiniteLoss || kind == ErrorKind::DegenerateWeights;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) raise(kind, message);
}

}  // namespace dealmvc
