#pragma once

#include <stdexcept>
#include <string>

namespace qlwave {

/// Raised when an argument violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The squared wave speed (or the time-derivative coefficient) dropped below
/// the hyperbolicity guard.
class HyperbolicityLoss : public std::runtime_error {
public:
    HyperbolicityLoss(const std::string& what, double radicand)
        : std::runtime_error(what), radicand_(radicand) {}

    double radicand() const noexcept { return radicand_; }

private:
    double radicand_;
};

/// A field sampled on a grid is too coarse for the requested quadrature.
class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Closed-form blow-up profile evaluated at or past its singularity.
class DivergenceError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Too few usable samples for a fit.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A certificate cannot be issued because a branch assumption fails.
class CertificateRefused : public std::runtime_error {
public:
    CertificateRefused(const std::string& what, double translation_hint)
        : std::runtime_error(what), translation_hint_(translation_hint) {}

    /// Offset that would move the data into the required window (NaN if none).
    double translation_hint() const noexcept { return translation_hint_; }

private:
    double translation_hint_;
};

}  // namespace qlwave
