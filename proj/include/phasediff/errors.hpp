// errors.hpp — exception taxonomy shared by all phasediff modules

#pragma once

#include <stdexcept>
#include <string>

namespace phasediff {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid parameter values (negative energies, beta outside [0,1], ...)
struct DomainError : Error {
    using Error::Error;
};

// Fock-space tail mass above the configured tolerance; carries the measured tail
struct TruncationError : Error {
    double tail_mass;
    TruncationError(const std::string& msg, double tail) : Error(msg), tail_mass(tail) {}
};

// Cutoff search exceeded the configured hard limit
struct ResourceError : Error {
    using Error::Error;
};

// Overflow/underflow outside the representable range of the wavefunction recurrence
struct RangeError : Error {
    using Error::Error;
};

// Quadrature grid fails to capture the probability mass of a state
struct GridCoverageError : Error {
    using Error::Error;
};

// Density matrix handed to the real-symmetric path has non-negligible imaginary parts
struct ConventionError : Error {
    using Error::Error;
};

// Eigenvalue below the tolerated negativity floor
struct PositivityError : Error {
    using Error::Error;
};

// Bisection endpoints lie in the same regime
struct NoCrossingError : Error {
    using Error::Error;
};

// Likelihood carries no information about the phase (or the search degenerates)
struct EstimationError : Error {
    using Error::Error;
};

// Least-squares fit impossible (degenerate design matrix, too few records)
struct FitError : Error {
    using Error::Error;
};

// Invalid command-line/config input; maps to exit code 2
struct UsageError : Error {
    using Error::Error;
};

} // namespace phasediff
