#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace weakpheno {

enum class ErrorKind {
  InsufficientData,
  DegenerateInput,
  InvalidGrouping,
  InvalidInput,
  EmptyFilterSet,
  CalibrationFailure,
  InvalidSplit,
  EmptyEvaluationSet,
  StratumExhausted,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure the library reports. The kind is stable
/// and machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace weakpheno
