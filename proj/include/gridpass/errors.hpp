#pragma once

#include <stdexcept>
#include <string>

namespace gridpass {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed case files, invalid parameters, unknown buses.
/// The CLI maps these to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : ConfigError(what), line_(line), column_(column) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class SchemaError : public ConfigError {
public:
    SchemaError(const std::string& key, const std::string& what)
        : ConfigError(key + ": " + what), key_(key) {}
    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Controller synthesis asked for a gain outside the admissible range.
class SynthesisError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A numerical routine failed. The CLI maps these to exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotSymmetric : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
public:
    NoConvergence(const std::string& what, int iterations)
        : NumericalError(what), iterations_(iterations) {}
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
};

class SingularJacobian : public NumericalError {
public:
    SingularJacobian(const std::string& what, int iteration)
        : NumericalError(what), iteration_(iteration) {}
    [[nodiscard]] int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// A state left the model domain (V or E_q too small, or non-finite).
class DomainExit : public NumericalError {
public:
    DomainExit(const std::string& what, double time)
        : NumericalError(what), time_(time) {}
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace gridpass
