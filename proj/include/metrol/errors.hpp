#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metrol {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Numerical procedure could not deliver a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pointwise evaluation requested at an integrable singularity.
class SingularPointError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Step-halving test failed; carries the step size that should be tried next.
class ResolutionError : public NumericalError {
public:
    ResolutionError(const std::string& what, double suggested_step)
        : NumericalError(what), suggested_step_(suggested_step) {}
    double suggested_step() const noexcept { return suggested_step_; }

private:
    double suggested_step_;
};

class DegenerateRootsError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoBracketError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Amplitude dropped below the rate-extraction threshold at `cutoff_index`.
class AmplitudeVanishesError : public NumericalError {
public:
    AmplitudeVanishesError(const std::string& what, std::size_t cutoff_index)
        : NumericalError(what), cutoff_index_(cutoff_index) {}
    std::size_t cutoff_index() const noexcept { return cutoff_index_; }

private:
    std::size_t cutoff_index_;
};

class SingularOutcomeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class UnderResolvedError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Invalid experiment configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace metrol
