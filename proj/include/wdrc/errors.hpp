#pragma once

#include <stdexcept>
#include <string>

namespace wdrc {

enum class ErrorCode {
    NotPSD,
    NotPD,
    DimMismatch,
    SingularMatrix,
    SingularInnovation,
    PenaltyTooSmall,
    NoFeasibleLambda,
    Diverged,
    EmptySamples,
    DegenerateLQ,
    Config,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotPSD: return "NotPSD";
        case ErrorCode::NotPD: return "NotPD";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::SingularInnovation: return "SingularInnovation";
        case ErrorCode::PenaltyTooSmall: return "PenaltyTooSmall";
        case ErrorCode::NoFeasibleLambda: return "NoFeasibleLambda";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::EmptySamples: return "EmptySamples";
        case ErrorCode::DegenerateLQ: return "DegenerateLQ";
        case ErrorCode::Config: return "Config";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    // Message without the category prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

// Penalty too small: lambda*I - P_t is not positive definite at `stage`.
class PenaltyTooSmall : public Error {
public:
    PenaltyTooSmall(int stage, double margin)
        : Error(ErrorCode::PenaltyTooSmall,
                "lambda*I - P_t not positive definite at stage " + std::to_string(stage) +
                    " (margin " + std::to_string(margin) + ")"),
          stage_(stage),
          margin_(margin) {}

    [[nodiscard]] int stage() const noexcept { return stage_; }
    [[nodiscard]] double margin() const noexcept { return margin_; }

private:
    int stage_;
    double margin_;
};

// Wraps a lower-level failure with the simulation run and stage where it happened.
class StageError : public Error {
public:
    StageError(const Error& inner, long run, int stage)
        : Error(inner.code(), std::string("run ") + std::to_string(run) + ", stage " +
                                  std::to_string(stage) + ": " + inner.detail()),
          run_(run),
          stage_(stage) {}

    [[nodiscard]] long run() const noexcept { return run_; }
    [[nodiscard]] int stage() const noexcept { return stage_; }

private:
    long run_;
    int stage_;
};

namespace detail {
inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::DimMismatch, what);
}
}  // namespace detail

}  // namespace wdrc
