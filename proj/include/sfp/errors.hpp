#ifndef SFP_ERRORS_HPP
#define SFP_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sfp {

enum class ErrorCode : std::uint8_t {
    InvalidInput,
    NumericalFailure,
    ZeroMatrix,
    FormatError,
    InconsistentFiles,
    InsufficientData,
    InsufficientFeatures,
    Diverged,
    DegenerateDenominator,
    DegenerateProportions,
    ConfigError,
    IoError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::ZeroMatrix: return "ZeroMatrix";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::InconsistentFiles: return "InconsistentFiles";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::InsufficientFeatures: return "InsufficientFeatures";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorCode::DegenerateProportions: return "DegenerateProportions";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Library-wide exception. `detail` carries a context index where one exists
/// (e.g. the step at which a simulation diverged), -1 otherwise.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, long detail = -1)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    long detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    long detail_;
};

}  // namespace sfp

#endif  // SFP_ERRORS_HPP
