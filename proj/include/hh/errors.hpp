#pragma once

#include <stdexcept>
#include <string>

namespace hh {

/// Error taxonomy shared by every module. Each failure mode carries a code so
/// callers (and tests) can dispatch without parsing messages.
enum class ErrorCode {
    MuOutOfRange,
    EmptyIntersection,
    SingularOverlap,
    CaseMismatch,
    ShapeMismatch,
    LinearSolveFailure,
    NonConvergence,
    CoercivityFailure,
    MaxIterations,
    ContractionFailure,
    CouplingDivergence,
    ZeroPointNondifferentiable,
    ObservabilityTooWeak,
    LambdaEscalationFailure,
    CriticalPointLeak,
    DegenerateRHS,
    PicardDivergence,
    OuterDivergence,
    ParseError,
    ValidationError,
    InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace hh
