#pragma once

#include <stdexcept>
#include <string>

namespace boltzgrad {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid or unparseable configuration (file, spec, or argument structure).
struct ConfigError : Error {
    using Error::Error;
};

/// A numerical operation failed or a contract/invariant was violated.
struct NumericalError : Error {
    using Error::Error;
};

/// A hard resource budget was exhausted (events, proposals, samples).
struct BudgetError : Error {
    using Error::Error;
};

/// Phase-space configuration violates the exclusion constraint.
struct InvalidConfigurationError : NumericalError {
    using NumericalError::NumericalError;
};

/// Two-body orbit stayed inside the interaction range past the time cap.
struct TrappedOrbitError : NumericalError {
    using NumericalError::NumericalError;
};

/// Deflection angle is not invertible in the impact parameter.
struct AmbiguousInverseError : NumericalError {
    using NumericalError::NumericalError;
};

/// Evaluation requested outside a tabulated domain.
struct DomainError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace boltzgrad
