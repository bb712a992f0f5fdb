#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clair {

enum class ErrorKind : std::uint8_t {
    ZeroVector,
    DimensionMismatch,
    ShapeMismatch,
    NoConvergence,
    BadMagic,
    HeaderMismatch,
    CorruptLabels,
    NonFinite,
    InvalidConfig,
    ConfigError,
    NoLabels,
    MissingLabels,
    EmptyBank,
    GalleryTooSmall,
    IoError,
};

constexpr std::string_view error_name(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::HeaderMismatch: return "HeaderMismatch";
    case ErrorKind::CorruptLabels: return "CorruptLabels";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::NoLabels: return "NoLabels";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::EmptyBank: return "EmptyBank";
    case ErrorKind::GalleryTooSmall: return "GalleryTooSmall";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above; the CLI
/// prints the kind name as the diagnostic prefix.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace clair
