#pragma once

#include <stdexcept>
#include <string>

namespace stemflow {

// Base class for every error raised by the library. The CLI maps anything
// derived from DomainError to exit code 1.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public DomainError {
public:
    using DomainError::DomainError;
};

class IllConditionedSigmoid : public InvalidParameter {
public:
    using InvalidParameter::InvalidParameter;
};

class CflViolation : public DomainError {
public:
    using DomainError::DomainError;
};

class NumericalFailure : public DomainError {
public:
    using DomainError::DomainError;
};

class ResourceError : public DomainError {
public:
    using DomainError::DomainError;
};

class NoNonzeroSteadyState : public DomainError {
public:
    using DomainError::DomainError;
};

class QuadratureFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class PoleError : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class ConfigError : public DomainError {
public:
    using DomainError::DomainError;
};

class IoError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace stemflow
