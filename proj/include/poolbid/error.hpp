#pragma once

#include <stdexcept>
#include <string>

namespace poolbid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case file; carries the 1-based line/column of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Input data violates a structural rule (dimensions, monotonicity, connectivity...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Market clearing has no feasible dispatch.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed (singular system, iteration limit, cycling guard).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Experiment configuration is invalid.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace poolbid
