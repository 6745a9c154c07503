#pragma once

#include <stdexcept>
#include <string>

namespace wnsf {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed transfer function or polynomial (e.g. non-monic denominator).
class InvalidModelError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Normal-equation matrix of the ARX step is singular or too ill-conditioned.
class RankDeficiencyError : public Error {
public:
    RankDeficiencyError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Reduced (Toeplitz) least-squares problem has no unique solution.
class IdentifiabilityError : public Error {
public:
    IdentifiabilityError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// The weighting matrix cannot be formed at the current parameter estimate.
class WeightingBreakdownError : public Error {
public:
    WeightingBreakdownError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Closed loop (or a filter that must be stable) has poles on/outside the unit circle.
class UnstableLoopError : public Error {
public:
    using Error::Error;
};

/// A transfer function's denominator vanishes at a requested frequency.
class SingularFrequencyError : public Error {
public:
    using Error::Error;
};

/// A frequency weight (e.g. 1/H) is unbounded on the unit circle.
class SingularWeightError : public Error {
public:
    using Error::Error;
};

/// Frequency grid too coarse for the requested quantity.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// FIT is undefined when the true impulse response is constant.
class UndefinedFitError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Condition threshold shared by every factorization in the estimator.
inline constexpr double kConditionLimit = 1e12;

std::string format_number(double value);

}  // namespace wnsf
