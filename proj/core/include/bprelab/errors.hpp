#pragma once

#include <stdexcept>
#include <string>

namespace bprelab {

// Base for everything this library throws on contract violations.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the mathematical domain of an operation
// (generating function evaluated outside [0,1]^p, negative Rayleigh
// quantile, malformed probability vector, ...).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// A nonnegative matrix lost a column (or the whole mass) somewhere a
// strictly positive quantity was required.
struct DegenerateMatrix : Error {
    explicit DegenerateMatrix(const std::string& msg) : Error(msg) {}
};

// Criticality calibration could not bracket a sign change of the
// Lyapunov exponent along the tuning knob.
struct CalibrationFailed : Error {
    explicit CalibrationFailed(const std::string& msg) : Error(msg) {}
};

// A conditioned sampler produced fewer accepted paths than the minimum
// required for the downstream statistic.
struct InsufficientAcceptance : Error {
    explicit InsufficientAcceptance(const std::string& msg) : Error(msg) {}
};

// Integer population arithmetic would exceed the exact-count range.
struct OverflowGuard : Error {
    explicit OverflowGuard(const std::string& msg) : Error(msg) {}
};

// The harmonic-function estimate at the requested root is not usably
// positive, so conditioned expectations cannot be formed there.
struct RootValueNonpositive : Error {
    explicit RootValueNonpositive(const std::string& msg) : Error(msg) {}
};

// Experiment configuration is malformed or inconsistent.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A precondition gate (hypothesis validation) failed and was not
// explicitly overridden.
struct GateFailed : Error {
    explicit GateFailed(const std::string& msg) : Error(msg) {}
};

// A sample container was empty where at least one point is needed.
struct EmptySample : Error {
    explicit EmptySample(const std::string& msg) : Error(msg) {}
};

// A value that must be strictly positive (log-space fit input) was not.
struct NonPositiveValue : Error {
    explicit NonPositiveValue(const std::string& msg) : Error(msg) {}
};

}  // namespace bprelab
