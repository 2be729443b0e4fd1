#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diatomic {

/// Shapes of tables, policies or kernels do not match the MDP.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A scalar argument lies outside its mathematical domain (alpha, tau, weights, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An operation precondition on the model does not hold (non-balanced MDP,
/// non alpha-coherent policy, ...).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A configured budget (atom count, enumeration size, LP size) would be exceeded.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed-point iteration stopped at max_iter without reaching the tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, std::size_t iterations)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

/// A mathematical property that must hold by construction was violated.
class PropertyFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The simplex solver hit a numerical breakdown.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace diatomic
