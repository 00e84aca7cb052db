#include "fracperim/error.hpp"

namespace fracperim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DegenerateDomain: return "DegenerateDomain";
        case ErrorCode::InvalidInterval: return "InvalidInterval";
        case ErrorCode::InvalidRadius: return "InvalidRadius";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::SpecMismatch: return "SpecMismatch";
        case ErrorCode::NotDisjoint: return "NotDisjoint";
        case ErrorCode::NotNested: return "NotNested";
        case ErrorCode::InvalidSequence: return "InvalidSequence";
        case ErrorCode::EpsilonBelowResolution: return "EpsilonBelowResolution";
        case ErrorCode::InvalidSchedule: return "InvalidSchedule";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::OracleTooLarge: return "OracleTooLarge";
        case ErrorCode::WindowTooShort: return "WindowTooShort";
        case ErrorCode::HypothesisViolated: return "HypothesisViolated";
        case ErrorCode::ConfinementUndetermined: return "ConfinementUndetermined";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace fracperim
