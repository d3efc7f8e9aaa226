#pragma once

#include <stdexcept>
#include <string>

namespace rmtcluster {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Factorization, root finding or quadrature did not reach its target.
class NumericalError : public Error {
public:
    using Error::Error;
};

// File could not be read or written, or a document is malformed.
class IoError : public Error {
public:
    using Error::Error;
};

// Caller violated a documented precondition (missing pair, bad index).
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace rmtcluster
