#pragma once

#include <stdexcept>
#include <string>

namespace mbcr {

/// Malformed input: dimension mismatches, invalid configuration, bad files.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (e.g. deleting from K = 1).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Cholesky failed even after jitter escalation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Truncated sampling exhausted its attempt cap.
class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The MCMC chain could not proceed (too many numerical failures).
class ChainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mbcr
