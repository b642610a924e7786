#pragma once

#include <stdexcept>
#include <string>

namespace ripple {

/// Malformed or unsupported external data: WAV headers, checkpoints,
/// mismatched shapes coming from files.
struct DataFormatError : std::runtime_error {
    explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: NaN/Inf where finite values are required,
/// diverged training, failed gradient checks.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint loading distinguishes three failure modes.
struct BadMagicError : DataFormatError {
    explicit BadMagicError(const std::string& what) : DataFormatError(what) {}
};
struct VersionError : DataFormatError {
    explicit VersionError(const std::string& what) : DataFormatError(what) {}
};
struct ChecksumError : DataFormatError {
    explicit ChecksumError(const std::string& what) : DataFormatError(what) {}
};

}  // namespace ripple
