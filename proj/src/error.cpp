#include "grafflow/error.hpp"

namespace grafflow {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnknownVertex: return "UnknownVertex";
    case ErrorKind::InvalidCondition: return "InvalidCondition";
    case ErrorKind::InvalidDegree: return "InvalidDegree";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidGraph: return "InvalidGraph";
    case ErrorKind::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorKind::SingularTraceSystem: return "SingularTraceSystem";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::DivergedFlow: return "DivergedFlow";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::NonpositiveMass: return "NonpositiveMass";
    case ErrorKind::FrequencyTooSmall: return "FrequencyTooSmall";
    case ErrorKind::RootFindFailure: return "RootFindFailure";
    case ErrorKind::TopologyMismatch: return "TopologyMismatch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace grafflow
