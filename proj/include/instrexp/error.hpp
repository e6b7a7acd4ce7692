#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace instrexp {

enum class ErrorCode {
    // template-core
    UnbalancedBraces,
    InvalidExpr,
    MissingField,
    TypeMismatch,
    // ppg
    MaskExhausted,
    // llm / embedding backends
    BackendUnavailable,
    BadResponse,
    RateLimited,
    ParseFailure,
    // numerics
    ZeroVector,
    DimensionMismatch,
    EmptyPool,
    InconsistentEpsilon,
    DistributionUnbuilt,
    LengthMismatch,
    ZeroVariance,
    // dataset / io
    PoolMissing,
    IoError,
    SchemaError,
    // caller broke a documented precondition
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exit-code class used by the CLI: data errors map to 2, backend errors to 3.
enum class ErrorClass { Usage, Data, Backend };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Backend asked us to slow down; carries the server's retry-after hint.
class RateLimitedError : public Error {
public:
    RateLimitedError(const std::string& message, double retry_after_seconds)
        : Error(ErrorCode::RateLimited, message), retry_after_(retry_after_seconds) {}

    double retry_after_seconds() const noexcept { return retry_after_; }

private:
    double retry_after_;
};

}  // namespace instrexp
