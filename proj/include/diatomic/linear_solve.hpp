#pragma once

#include "diatomic/errors.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace diatomic {

/// Solves the dense n x n system A x = b (row-major A) by Gaussian elimination
/// with partial pivoting. Throws SolverError on a (numerically) singular matrix.
inline std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    if (a.size() != n * n) throw StructuralError("solve_linear_system: matrix must be n x n");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row) {
            if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) pivot = row;
        }
        if (std::abs(a[pivot * n + col]) < 1e-14) {
            throw SolverError("solve_linear_system: singular matrix at column " + std::to_string(col));
        }
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t row = col + 1; row < n; ++row) {
            const double f = a[row * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[row * n + k] -= f * a[col * n + k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= a[i * n + k] * x[k];
        x[i] = acc / a[i * n + i];
    }
    return x;
}

} // namespace diatomic
