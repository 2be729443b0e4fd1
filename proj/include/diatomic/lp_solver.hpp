#pragma once

#include "diatomic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace diatomic {

enum class RowSense { le, eq, ge };
enum class ObjectiveSense { minimize, maximize };
enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus status) {
    switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Dense LP: optimize c'x subject to rows (sense) rhs and lower <= x <= upper.
struct LpProblem {
    ObjectiveSense sense = ObjectiveSense::minimize;
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<RowSense> senses;
    std::vector<double> rhs;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::string> var_names;
    std::vector<std::string> row_names;

    /// n variables in [0, +inf) with zero objective.
    static LpProblem with_variables(std::size_t n, ObjectiveSense sense = ObjectiveSense::minimize) {
        LpProblem p;
        p.sense = sense;
        p.objective.assign(n, 0.0);
        p.lower.assign(n, 0.0);
        p.upper.assign(n, kInfinity);
        for (std::size_t j = 0; j < n; ++j) p.var_names.push_back("v" + std::to_string(j));
        return p;
    }

    std::size_t n_vars() const noexcept { return objective.size(); }
    std::size_t n_rows() const noexcept { return rows.size(); }

    void add_row(std::vector<double> coeffs, RowSense row_sense, double b, std::string name = {}) {
        if (name.empty()) name = "r" + std::to_string(rows.size());
        rows.push_back(std::move(coeffs));
        senses.push_back(row_sense);
        rhs.push_back(b);
        row_names.push_back(std::move(name));
    }

    void validate() const {
        const std::size_t n = n_vars();
        if (lower.size() != n || upper.size() != n) throw StructuralError("LpProblem: bounds must match variables");
        if (senses.size() != rows.size() || rhs.size() != rows.size()) {
            throw StructuralError("LpProblem: senses and right-hand sides must match rows");
        }
        for (double c : objective) {
            if (!std::isfinite(c)) throw DomainError("LpProblem: objective coefficients must be finite");
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != n) throw StructuralError("LpProblem: row " + std::to_string(i) + " has wrong width");
            for (double v : rows[i]) {
                if (!std::isfinite(v)) throw DomainError("LpProblem: constraint coefficients must be finite");
            }
            if (!std::isfinite(rhs[i])) throw DomainError("LpProblem: right-hand sides must be finite");
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] || lower[j] == kInfinity ||
                upper[j] == -kInfinity) {
                throw DomainError("LpProblem: invalid bounds on variable " + std::to_string(j));
            }
        }
    }
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective_value = 0.0;
    /// d(objective)/d(rhs_i) for every original row, at optimal status.
    std::vector<double> dual_values;
    double primal_residual = 0.0;
    double complementary_slackness = 0.0;
    std::size_t pivots = 0;
};

struct LpLimits {
    std::size_t max_vars = 2'000;
    std::size_t max_rows = 10'000;
    double tolerance = 1e-9;
};

namespace detail {

/// Dense simplex tableau over columns x >= 0 with rows T x = b.
class Tableau {
public:
    Tableau(std::vector<std::vector<double>> t, std::vector<double> b, std::vector<std::size_t> basis, double tol)
        : t_(std::move(t)), b_(std::move(b)), basis_(std::move(basis)), tol_(tol) {}

    /// Minimizes cost'x over columns with allowed[j]; returns false if unbounded.
    bool minimize(const std::vector<double>& cost, const std::vector<bool>& allowed, std::size_t& pivots,
                  std::size_t max_pivots) {
        reduced_ = cost;
        for (std::size_t i = 0; i < t_.size(); ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < reduced_.size(); ++j) reduced_[j] -= cb * t_[i][j];
        }
        while (true) {
            // Bland: lowest-index improving column, then lowest-index basic variable among ratio ties.
            std::size_t enter = reduced_.size();
            for (std::size_t j = 0; j < reduced_.size(); ++j) {
                if (allowed[j] && reduced_[j] < -tol_) {
                    enter = j;
                    break;
                }
            }
            if (enter == reduced_.size()) return true;
            std::size_t leave = t_.size();
            double best = kInfinity;
            for (std::size_t i = 0; i < t_.size(); ++i) {
                if (t_[i][enter] <= tol_) continue;
                const double ratio = b_[i] / t_[i][enter];
                if (leave == t_.size() || ratio < best - tol_ ||
                    (ratio <= best + tol_ && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave == t_.size()) return false;
            if (++pivots > max_pivots) {
                throw SolverError("simplex: pivot limit reached; recent pivots: " + log_text());
            }
            pivot(leave, enter);
        }
    }

    void pivot(std::size_t row, std::size_t col) {
        log_.push_back({row, col});
        if (log_.size() > 16) log_.pop_front();
        const double p = t_[row][col];
        if (std::abs(p) < 1e-14) throw SolverError("simplex: near-zero pivot; recent pivots: " + log_text());
        for (double& v : t_[row]) v /= p;
        b_[row] /= p;
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (i == row) continue;
            const double f = t_[i][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < t_[i].size(); ++j) t_[i][j] -= f * t_[row][j];
            t_[i][col] = 0.0;
            b_[i] -= f * b_[row];
            if (b_[i] < 0.0 && b_[i] > -tol_) b_[i] = 0.0;
        }
        if (!reduced_.empty()) {
            const double f = reduced_[col];
            for (std::size_t j = 0; j < reduced_.size(); ++j) reduced_[j] -= f * t_[row][j];
            reduced_[col] = 0.0;
        }
        basis_[row] = col;
    }

    /// Moves basic columns with !allowed[j] out of the basis where a pivot exists.
    void drive_out(const std::vector<bool>& allowed) {
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (allowed[basis_[i]]) continue;
            for (std::size_t j = 0; j < allowed.size(); ++j) {
                if (allowed[j] && std::abs(t_[i][j]) > 1e-9) {
                    pivot(i, j);
                    break;
                }
            }
        }
    }

    std::vector<double> values(std::size_t n_cols) const {
        std::vector<double> x(n_cols, 0.0);
        for (std::size_t i = 0; i < t_.size(); ++i) x[basis_[i]] = b_[i];
        return x;
    }

    const std::vector<double>& reduced() const noexcept { return reduced_; }

private:
    std::string log_text() const {
        std::ostringstream out;
        for (const auto& [r, c] : log_) out << "(row " << r << ", col " << c << ") ";
        return out.str();
    }

    std::vector<std::vector<double>> t_;
    std::vector<double> b_;
    std::vector<std::size_t> basis_;
    std::vector<double> reduced_;
    std::deque<std::pair<std::size_t, std::size_t>> log_;
    double tol_;
};

} // namespace detail

/**
 * Two-phase dense simplex with Bland's rule. Bounded and free variables are
 * rewritten over nonnegative columns; finite upper bounds become extra rows.
 */
inline LpSolution solve(const LpProblem& problem, const LpLimits& limits = {}) {
    problem.validate();
    const std::size_t n = problem.n_vars();
    if (n > limits.max_vars || problem.n_rows() > limits.max_rows) {
        throw ResourceError("solve: LP of " + std::to_string(n) + " variables x " +
                            std::to_string(problem.n_rows()) + " rows exceeds the cap of " +
                            std::to_string(limits.max_vars) + " x " + std::to_string(limits.max_rows));
    }
    const double sign = problem.sense == ObjectiveSense::maximize ? -1.0 : 1.0;

    // x_j = offset_j + sum over its (column, coefficient) pairs.
    std::vector<double> offset(n, 0.0);
    std::vector<std::vector<std::pair<std::size_t, double>>> columns_of(n);
    std::size_t n_struct = 0;
    std::vector<std::pair<std::size_t, double>> upper_rows; // (column, width)
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = problem.lower[j];
        const double hi = problem.upper[j];
        if (std::isfinite(lo)) {
            offset[j] = lo;
            columns_of[j].push_back({n_struct, 1.0});
            if (std::isfinite(hi)) upper_rows.push_back({n_struct, hi - lo});
            ++n_struct;
        } else if (std::isfinite(hi)) {
            offset[j] = hi;
            columns_of[j].push_back({n_struct++, -1.0});
        } else {
            columns_of[j].push_back({n_struct++, 1.0});
            columns_of[j].push_back({n_struct++, -1.0});
        }
    }

    struct Row {
        std::vector<double> a;
        RowSense sense;
        double b;
        double flip;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < problem.n_rows(); ++i) {
        Row row{std::vector<double>(n_struct, 0.0), problem.senses[i], problem.rhs[i], 1.0};
        for (std::size_t j = 0; j < n; ++j) {
            const double v = problem.rows[i][j];
            if (v == 0.0) continue;
            row.b -= v * offset[j];
            for (const auto& [col, coef] : columns_of[j]) row.a[col] += v * coef;
        }
        rows.push_back(std::move(row));
    }
    for (const auto& [col, width] : upper_rows) {
        Row row{std::vector<double>(n_struct, 0.0), RowSense::le, width, 1.0};
        row.a[col] = 1.0;
        rows.push_back(std::move(row));
    }
    for (Row& row : rows) {
        if (row.b < 0.0) {
            for (double& v : row.a) v = -v;
            row.b = -row.b;
            row.flip = -1.0;
            if (row.sense == RowSense::le) {
                row.sense = RowSense::ge;
            } else if (row.sense == RowSense::ge) {
                row.sense = RowSense::le;
            }
        }
    }

    // Column layout: structural | slack or surplus per inequality row | artificial per ge/eq row.
    const std::size_t m = rows.size();
    std::vector<std::size_t> unit_col(m);
    std::size_t n_cols = n_struct;
    std::vector<std::size_t> slack_col(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].sense != RowSense::eq) slack_col[i] = n_cols++;
    }
    const std::size_t first_artificial = n_cols;
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].sense == RowSense::le) {
            unit_col[i] = slack_col[i];
        } else {
            unit_col[i] = n_cols++;
        }
    }
    std::vector<std::vector<double>> t(m, std::vector<double>(n_cols, 0.0));
    std::vector<double> b(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(rows[i].a.begin(), rows[i].a.end(), t[i].begin());
        if (rows[i].sense == RowSense::le) t[i][slack_col[i]] = 1.0;
        if (rows[i].sense == RowSense::ge) t[i][slack_col[i]] = -1.0;
        t[i][unit_col[i]] = 1.0;
        b[i] = rows[i].b;
    }

    detail::Tableau tableau(std::move(t), b, unit_col, limits.tolerance);
    LpSolution out;
    const std::size_t max_pivots = 50 * (m + n_cols) + 10'000;
    std::vector<bool> all(n_cols, true);

    if (first_artificial < n_cols) {
        std::vector<double> phase1(n_cols, 0.0);
        for (std::size_t j = first_artificial; j < n_cols; ++j) phase1[j] = 1.0;
        tableau.minimize(phase1, all, out.pivots, max_pivots);
        const auto x = tableau.values(n_cols);
        double infeasibility = 0.0;
        for (std::size_t j = first_artificial; j < n_cols; ++j) infeasibility += x[j];
        double scale = 1.0;
        for (double v : b) scale = std::max(scale, std::abs(v));
        if (infeasibility > 1e-8 * scale) {
            out.status = LpStatus::infeasible;
            return out;
        }
    }
    std::vector<bool> allowed(n_cols, true);
    for (std::size_t j = first_artificial; j < n_cols; ++j) allowed[j] = false;
    tableau.drive_out(allowed);

    std::vector<double> cost(n_cols, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (const auto& [col, coef] : columns_of[j]) cost[col] += sign * problem.objective[j] * coef;
    }
    if (!tableau.minimize(cost, allowed, out.pivots, max_pivots)) {
        out.status = LpStatus::unbounded;
        return out;
    }

    out.status = LpStatus::optimal;
    const auto xs = tableau.values(n_cols);
    out.x.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        out.x[j] = offset[j];
        for (const auto& [col, coef] : columns_of[j]) out.x[j] += coef * xs[col];
    }
    out.objective_value = 0.0;
    for (std::size_t j = 0; j < n; ++j) out.objective_value += problem.objective[j] * out.x[j];

    // y_i = cost(unit column) - reduced cost; the unit columns carry zero cost.
    const auto& d = tableau.reduced();
    out.dual_values.resize(problem.n_rows());
    for (std::size_t i = 0; i < problem.n_rows(); ++i) out.dual_values[i] = -d[unit_col[i]] * rows[i].flip * sign;

    for (std::size_t i = 0; i < problem.n_rows(); ++i) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < n; ++j) lhs += problem.rows[i][j] * out.x[j];
        const double diff = lhs - problem.rhs[i];
        double violation = 0.0;
        if (problem.senses[i] == RowSense::le) violation = std::max(0.0, diff);
        if (problem.senses[i] == RowSense::ge) violation = std::max(0.0, -diff);
        if (problem.senses[i] == RowSense::eq) violation = std::abs(diff);
        out.primal_residual = std::max(out.primal_residual, violation);
    }
    for (std::size_t j = 0; j < n; ++j) {
        out.primal_residual = std::max({out.primal_residual, problem.lower[j] - out.x[j], out.x[j] - problem.upper[j]});
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
        if (!allowed[j]) continue;
        out.complementary_slackness = std::max(out.complementary_slackness, std::abs(xs[j] * d[j]));
    }
    return out;
}

} // namespace diatomic
