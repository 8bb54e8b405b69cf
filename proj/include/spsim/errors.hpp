#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spsim {

/// Argument outside the domain of a forward model or estimator.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Parameter set violating a type invariant or an operation precondition.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Filesystem failure (unreadable source, unwritable destination).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for malformed time-tag files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
public:
    TruncatedFileError(std::uint64_t expected, std::uint64_t found)
        : FormatError("truncated record section: expected " + std::to_string(expected) +
                      " records, found " + std::to_string(found)),
          expected_(expected), found_(found) {}

    std::uint64_t expected() const noexcept { return expected_; }
    std::uint64_t found() const noexcept { return found_; }

private:
    std::uint64_t expected_;
    std::uint64_t found_;
};

class NonMonotoneError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Record with an invalid channel or a timestamp beyond the stream duration.
class InvalidRecordError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace spsim
