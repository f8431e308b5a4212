#pragma once

#include <stdexcept>
#include <string>

namespace icat {

// Bad user input: configuration keys, geometry that violates invariants.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Any failure of a numerical procedure (singular evaluation, no bracket, divergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConductorIntrusion : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class QuadratureNotConverged : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoBracket : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace icat
