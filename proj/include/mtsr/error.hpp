#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtsr {

/// Base for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or grid extents that do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid or mismatched configuration (instance, layout, training knobs).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or other numerical breakdown during training.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Checkpoint container errors. Each failure mode has its own type.
class FormatError : public Error {
public:
    using Error::Error;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

class ManifestError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace mtsr
