#ifndef FCNAD_ERROR_HPP
#define FCNAD_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcnad {

enum class ErrorCode {
    Shape,
    InsufficientHistory,
    Decode,
    BadMagic,
    VersionMismatch,
    Truncated,
    Checksum,
    Bounds,
    Config,
    DegenerateData,
    NotPositiveDefinite,
    NonFinite,
    UndefinedMetric,
    Io,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Shape: return "shape";
    case ErrorCode::InsufficientHistory: return "insufficient-history";
    case ErrorCode::Decode: return "decode";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::VersionMismatch: return "version-mismatch";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::Checksum: return "checksum";
    case ErrorCode::Bounds: return "bounds";
    case ErrorCode::Config: return "config";
    case ErrorCode::DegenerateData: return "degenerate-data";
    case ErrorCode::NotPositiveDefinite: return "not-positive-definite";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::UndefinedMetric: return "undefined-metric";
    case ErrorCode::Io: return "io";
    }
    return "unknown";
}

/// Single exception type for the library; `code()` distinguishes failure classes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace fcnad

#endif
