#include "dsteer/errors.hpp"

namespace dsteer {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
        case ErrorKind::SchemeDiverged: return "SchemeDiverged";
        case ErrorKind::MassDeficit: return "MassDeficit";
        case ErrorKind::AllMasked: return "AllMasked";
        case ErrorKind::TooFewParticles: return "TooFewParticles";
        case ErrorKind::NotMonotone: return "NotMonotone";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::EmptyControlGrid: return "EmptyControlGrid";
        case ErrorKind::PsorStalled: return "PsorStalled";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::RootNotBracketed: return "RootNotBracketed";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::UnknownPreset: return "UnknownPreset";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

ParseError::ParseError(std::string message, int line, int column)
    : Error(ErrorKind::ParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

ValidationError::ValidationError(std::string field, std::string reason)
    : Error(ErrorKind::ValidationError, field + ": " + reason),
      field_(std::move(field)),
      reason_(std::move(reason)) {}

}  // namespace dsteer
