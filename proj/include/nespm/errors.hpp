#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nespm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-range argument.
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Evaluation at a singular configuration (pole, gimbal lock, rotation near pi).
class SingularityError : public Error
{
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error
{
public:
    NotPositiveDefiniteError(const std::string& what, double min_eigenvalue)
        : Error(what + " (smallest eigenvalue " + std::to_string(min_eigenvalue) + ")"),
          min_eigenvalue_(min_eigenvalue)
    {
    }

    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class SingularInnovationError : public Error
{
public:
    using Error::Error;
};

class DivergenceError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (non-monotone time, bad rates).
class DataError : public Error
{
public:
    using Error::Error;
};

class ParseError : public DataError
{
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace nespm
