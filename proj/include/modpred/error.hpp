#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modpred {

enum class ErrorCode {
    MalformedStream,
    ParseError,
    FatalFormat,
    MissingColumn,
    UnknownStageName,
    BadCatalog,
    BadConfig,
    InvalidGraph,
    UnfittedComponent,
    NoLabels,
    InsufficientData,
    KindMismatch,
    DimensionMismatch,
    LengthMismatch,
    EmptyInput,
    NoOverlap,
    BadScenario,
    UnknownBenchmark,
    BadModel,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::MalformedStream: return "MalformedStream";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FatalFormat: return "FatalFormat";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnknownStageName: return "UnknownStageName";
    case ErrorCode::BadCatalog: return "BadCatalog";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::UnfittedComponent: return "UnfittedComponent";
    case ErrorCode::NoLabels: return "NoLabels";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::BadScenario: return "BadScenario";
    case ErrorCode::UnknownBenchmark: return "UnknownBenchmark";
    case ErrorCode::BadModel: return "BadModel";
    }
    return "Unknown";
}

/// Configuration problems (exit 2 at the CLI) versus data/model problems (exit 3).
constexpr bool is_configuration_error(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::BadCatalog:
    case ErrorCode::BadConfig:
    case ErrorCode::InvalidGraph:
    case ErrorCode::BadScenario:
    case ErrorCode::UnknownBenchmark:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace modpred
