#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cxr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input text could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed data that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Binary file is corrupt, truncated, or of an unknown version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A keyed lookup (record id, fold artifact) found nothing.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cxr
