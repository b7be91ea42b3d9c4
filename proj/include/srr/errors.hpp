#pragma once

#include <stdexcept>
#include <string>

namespace srr {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths of the inputs do not line up.
class StructuralError : public Error {
public:
    using Error::Error;
};

class InvalidFactorError : public Error {
public:
    using Error::Error;
};

/// An allocation row does not sum to one.
class AllocationError : public Error {
public:
    using Error::Error;
};

/// Series is shorter than the window an operation needs.
class InsufficientLengthError : public Error {
public:
    using Error::Error;
};

/// A configuration or profile field is outside its valid range.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Config document is malformed or carries unknown keys.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyDataError : public Error {
public:
    using Error::Error;
};

/// Raised while reading meter data. Carries the 1-based CSV line, or 0 when
/// the failure is not tied to one row.
class IngestError : public Error {
public:
    IngestError(const std::string& what, long line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

/// A gap was found under a policy that does not tolerate gaps.
class GapError : public IngestError {
public:
    GapError(const std::string& what, std::string timestamp)
        : IngestError(what + " at " + timestamp), timestamp_(std::move(timestamp)) {}

    const std::string& timestamp() const noexcept { return timestamp_; }

private:
    std::string timestamp_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

}  // namespace srr
