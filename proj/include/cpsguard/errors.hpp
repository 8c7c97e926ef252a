#pragma once

#include <stdexcept>
#include <string>

namespace cpsguard {

// Every failure the library reports derives from Error. The CLI maps the
// three families below onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failures (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

class DimensionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InvalidInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// The problem is well posed but has no solution (exit code 2).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

// Malformed configuration or command line (exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace cpsguard
