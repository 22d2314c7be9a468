#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grafflow {

enum class ErrorKind {
  DisconnectedGraph,
  DimensionMismatch,
  UnknownVertex,
  InvalidCondition,
  InvalidDegree,
  InvalidParameter,
  InvalidGraph,
  MeshTooCoarse,
  SingularTraceSystem,
  LinearSolveFailure,
  DivergedFlow,
  ZeroMass,
  NonpositiveMass,
  FrequencyTooSmall,
  RootFindFailure,
  TopologyMismatch,
  InvalidSpec,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can report it in structured form.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace grafflow
