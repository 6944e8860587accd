#pragma once

#include <stdexcept>
#include <string>

namespace wordgan {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible extents, bad ranks, non-broadcastable operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced or an argument outside a function's domain.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values or unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Unreadable/unwritable files and malformed on-disk formats.
class IoError : public Error {
public:
    using Error::Error;
};

// Checkpoint-specific format failures (bad magic, manifest mismatch, truncation).
class FormatError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace wordgan
