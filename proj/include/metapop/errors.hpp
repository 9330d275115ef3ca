#ifndef METAPOP_ERRORS_HPP
#define METAPOP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace metapop {

/// Base class for all metapop errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A rate model that violates its construction contract (negative rates,
/// missing limits, non-finite parameters, or a hypothesis-violating model
/// passed where a conforming one is required).
struct InvalidModel : Error {
    explicit InvalidModel(const std::string& msg) : Error(msg) {}
};

/// Caller passed an out-of-contract argument (negative s, zero tolerance, ...).
struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

/// The truncated solve did not reach the requested tail/residual tolerance
/// before the truncation cap.
struct TruncationDiverged : Error {
    explicit TruncationDiverged(const std::string& msg) : Error(msg) {}
};

/// A resolvent or eigenvalue computation left its valid spectral domain
/// (singular solve, non-positive resolvent, iteration non-convergence).
struct SpectralDomainError : Error {
    explicit SpectralDomainError(const std::string& msg) : Error(msg) {}
};

/// Fixed-point bracketing failed; signals an inconsistent numerical G.
struct FixedPointFailure : Error {
    explicit FixedPointFailure(const std::string& msg) : Error(msg) {}
};

/// No finite crossing bound exists (requested when the tail condition fails).
struct NoBound : Error {
    explicit NoBound(const std::string& msg) : Error(msg) {}
};

/// Adaptive step size underflowed.
struct StiffnessError : Error {
    explicit StiffnessError(const std::string& msg) : Error(msg) {}
};

/// Integration left the admissible region (mass defect or negativity too large).
struct IntegrationDiverged : Error {
    explicit IntegrationDiverged(const std::string& msg) : Error(msg) {}
};

/// A comparison envelope that must hold analytically was violated numerically.
struct ComparisonViolated : Error {
    explicit ComparisonViolated(const std::string& msg) : Error(msg) {}
};

/// Pathwise ordering broken inside a coupled simulation. Always a bug.
struct CouplingBug : Error {
    explicit CouplingBug(const std::string& msg) : Error(msg) {}
};

/// An internal cross-check between two equivalent computations failed.
struct InternalCheckFailure : Error {
    explicit InternalCheckFailure(const std::string& msg) : Error(msg) {}
};

}  // namespace metapop

#endif  // METAPOP_ERRORS_HPP
