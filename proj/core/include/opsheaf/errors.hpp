#pragma once

#include <stdexcept>
#include <string>

namespace opsheaf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A cochain, matrix or spec does not match the stalk dimensions of a sheaf.
class ConformanceError : public Error {
public:
    using Error::Error;
};

/// Structurally invalid input (bad incidence, non-orthonormal basis, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numeric parameter outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (unbracketed root, residual too large, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The forced Poisson system has no solution within tolerance.
class SolvabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Malformed model document; the message carries a path to the offending field.
class SchemaError : public Error {
public:
    using Error::Error;
};

} // namespace opsheaf
