#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace homog {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the coefficient expression parser. `offset()` is a byte offset into the source.
class ParseError : public Error {
public:
    enum class Kind { Syntax, UnknownIdentifier, WrongArity };

    ParseError(Kind kind, std::size_t offset, const std::string& message)
        : Error(message + " (at byte " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A proven inequality or exact identity failed numerically.
class VerificationError : public Error {
public:
    using Error::Error;
};

}  // namespace homog
