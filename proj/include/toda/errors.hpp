#pragma once

#include <stdexcept>
#include <string>

namespace toda {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: caller violated a precondition or supplied invalid data.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
public:
    ParseError(int line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Numerical failure: singular systems, overflow, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class OverflowError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// A computed quantity missed its declared tolerance.
class ToleranceError : public Error {
public:
    using Error::Error;
};

}  // namespace toda
