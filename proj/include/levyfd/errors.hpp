#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace levyfd {

/// Base class for all levyfd errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Cell index 0 or otherwise malformed cell request.
class InvalidCellError : public Error {
public:
    explicit InvalidCellError(const std::string& what) : Error(what) {}
};

/// Adaptive quadrature stopped short of the requested tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double achieved)
        : Error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
          achieved_tolerance(achieved) {}
    double achieved_tolerance;
};

/// Tail truncation hit the hard cap before reaching the mass budget.
class TailTruncationError : public Error {
public:
    TailTruncationError(const std::string& what, double residual)
        : Error(what + " (residual mass " + std::to_string(residual) + ")"),
          residual_mass(residual) {}
    double residual_mass;
};

/// Difference operator called with a zero or mismatched offset.
class InvalidOffsetError : public Error {
public:
    explicit InvalidOffsetError(const std::string& what) : Error(what) {}
};

/// Grid function and stencil weights built for different spacings.
class SpacingMismatchError : public Error {
public:
    explicit SpacingMismatchError(const std::string& what) : Error(what) {}
};

/// Coefficient evaluation produced NaN/Inf, a negative diffusion value,
/// or exceeded the declared bound.
class CoefficientError : public Error {
public:
    CoefficientError(const std::string& what, double t, double x)
        : Error(what + " at (t=" + std::to_string(t) + ", x=" + std::to_string(x) + ")"),
          time(t), point(x) {}
    double time;
    double point;
};

/// Sampling an analytic function onto the grid hit a non-finite value.
class SamplingError : public Error {
public:
    SamplingError(const std::string& what, double x)
        : Error(what + " at x=" + std::to_string(x)), point(x) {}
    double point;
};

/// Explicit time integration exceeded the blow-up guard.
class InstabilityError : public Error {
public:
    explicit InstabilityError(const std::string& what) : Error(what) {}
};

/// Linear solver failed to reach the residual tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::vector<double> residuals)
        : Error(what), residual_history(std::move(residuals)) {}
    std::vector<double> residual_history;
};

/// Implicit step size rejected by the solvability check.
class StepSizeError : public Error {
public:
    StepSizeError(const std::string& what, double threshold)
        : Error(what + " (estimated step threshold " + std::to_string(threshold) + ")"),
          step_threshold(threshold) {}
    double step_threshold;
};

/// Malformed study configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace levyfd
