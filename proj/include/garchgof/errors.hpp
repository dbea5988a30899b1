#pragma once

#include <stdexcept>
#include <string>

namespace garchgof {

/// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input: bad files, bad keys, parameters outside the
/// parameter space. The CLI maps these to exit code 1.
class InputError : public Error {
public:
    using Error::Error;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

/// Numerical failure (quadrature, factorization, singular systems).
/// The CLI maps these to exit code 2.
class NumericError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericError {
public:
    using NumericError::NumericError;
};

class EstimationError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace garchgof
