#include "agile_head/error.hpp"

namespace agile_head {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NonUnitAxis: return "NonUnitAxis";
    case ErrorCode::GimbalLock: return "GimbalLock";
    case ErrorCode::SingularPose: return "SingularPose";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::BadCalibration: return "BadCalibration";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::MalformedFrame: return "MalformedFrame";
    case ErrorCode::TopicInvalid: return "TopicInvalid";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace agile_head
