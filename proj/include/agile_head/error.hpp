#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agile_head {

enum class ErrorCode {
    NonUnitAxis,
    GimbalLock,
    SingularPose,
    NoConvergence,
    DomainError,
    NonMonotonicTime,
    DegenerateGeometry,
    TooFewPoints,
    BadCalibration,
    DegenerateFrame,
    InsufficientData,
    InvalidFrame,
    MalformedFrame,
    TopicInvalid,
    BindError,
    Disconnected,
    ParseError,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace agile_head
