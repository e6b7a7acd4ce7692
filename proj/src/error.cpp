#include "instrexp/error.hpp"

namespace instrexp {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
        case ErrorCode::InvalidExpr: return "InvalidExpr";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::TypeMismatch: return "TypeMismatch";
        case ErrorCode::MaskExhausted: return "MaskExhausted";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::BadResponse: return "BadResponse";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyPool: return "EmptyPool";
        case ErrorCode::InconsistentEpsilon: return "InconsistentEpsilon";
        case ErrorCode::DistributionUnbuilt: return "DistributionUnbuilt";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::PoolMissing: return "PoolMissing";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

ErrorClass classify(ErrorCode code) {
    switch (code) {
        case ErrorCode::BackendUnavailable:
        case ErrorCode::BadResponse:
        case ErrorCode::RateLimited:
        case ErrorCode::ParseFailure:
            return ErrorClass::Backend;
        case ErrorCode::InvalidArgument:
            return ErrorClass::Usage;
        default:
            return ErrorClass::Data;
    }
}

}  // namespace instrexp
