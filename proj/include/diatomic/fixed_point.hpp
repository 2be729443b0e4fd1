#pragma once

#include "diatomic/errors.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <utility>

namespace diatomic {

struct IterationControl {
    double tol = 1e-10;
    std::size_t max_iter = 10'000;
    /// When false, reaching max_iter returns the last iterate with converged = false.
    bool throw_on_max_iter = true;
};

/// Result of a fixed-point iteration: the last iterate together with the
/// sup-norm residual ||T(v) - v|| measured on the final step.
template <class Value>
struct FixedPoint {
    Value value;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
};

/**
 * Iterates `value <- apply(value)` until `distance(next, value) <= tol`.
 *
 * `observe(iteration, next, residual)` is invoked after every step, starting at
 * iteration 1. Throws ConvergenceError carrying the last residual when
 * `max_iter` steps do not reach the tolerance, unless the control asks for the
 * last iterate instead.
 */
template <class Value, class Apply, class Distance, class Observe>
FixedPoint<Value> iterate_to_fixed_point(Value init, Apply&& apply, Distance&& distance,
                                         const IterationControl& control, Observe&& observe,
                                         const std::string& name) {
    if (!(control.tol > 0.0)) {
        throw DomainError(name + ": tolerance must be positive");
    }
    Value current = std::move(init);
    double residual = 0.0;
    for (std::size_t iter = 1; iter <= control.max_iter; ++iter) {
        Value next = apply(current);
        residual = distance(next, current);
        observe(iter, next, residual);
        current = std::move(next);
        if (residual <= control.tol) {
            return {std::move(current), residual, iter, true};
        }
    }
    if (!control.throw_on_max_iter) {
        return {std::move(current), residual, control.max_iter, false};
    }
    throw ConvergenceError(name + " did not converge", residual, control.max_iter);
}

template <class Value, class Apply, class Distance>
FixedPoint<Value> iterate_to_fixed_point(Value init, Apply&& apply, Distance&& distance,
                                         const IterationControl& control, const std::string& name) {
    return iterate_to_fixed_point(std::move(init), std::forward<Apply>(apply),
                                  std::forward<Distance>(distance), control,
                                  [](std::size_t, const Value&, double) {}, name);
}

} // namespace diatomic
