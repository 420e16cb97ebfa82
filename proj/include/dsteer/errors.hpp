#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsteer {

enum class ErrorKind {
    NonFiniteEvaluation,
    SchemeDiverged,
    MassDeficit,
    AllMasked,
    TooFewParticles,
    NotMonotone,
    EmptyInput,
    EmptyControlGrid,
    PsorStalled,
    NotConverged,
    RootNotBracketed,
    ParseError,
    ValidationError,
    UnknownPreset,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Config parse failure with the offending position (1-based).
class ParseError : public Error {
public:
    ParseError(std::string message, int line, int column);

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Config field rejected by range validation.
class ValidationError : public Error {
public:
    ValidationError(std::string field, std::string reason);

    const std::string& field() const noexcept { return field_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string field_;
    std::string reason_;
};

}  // namespace dsteer
