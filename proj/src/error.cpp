#include "weakpheno/error.hpp"

namespace weakpheno {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::InvalidGrouping: return "InvalidGrouping";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::EmptyFilterSet: return "EmptyFilterSet";
    case ErrorKind::CalibrationFailure: return "CalibrationFailure";
    case ErrorKind::InvalidSplit: return "InvalidSplit";
    case ErrorKind::EmptyEvaluationSet: return "EmptyEvaluationSet";
    case ErrorKind::StratumExhausted: return "StratumExhausted";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace weakpheno
