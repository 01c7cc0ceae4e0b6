#pragma once

#include <stdexcept>
#include <string>

namespace t2p {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array shapes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid model / generator / run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data that cannot be processed (too short, mismatched labels, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Structurally inconsistent file (ragged columns, bad header, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace t2p
