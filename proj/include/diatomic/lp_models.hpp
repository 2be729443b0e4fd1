#pragma once

#include "diatomic/discrete_dist.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/lp_solver.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/risk_control.hpp"
#include "diatomic/robust_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace diatomic {

/// min sum_i lambda_i v_i / alpha over 0 <= lambda_i <= p_i with sum lambda = alpha.
inline LpProblem build_avar_dual(const DiscreteDist& d, double alpha) {
    detail::check_level(alpha, "build_avar_dual");
    LpProblem lp = LpProblem::with_variables(d.size());
    std::vector<double> ones(d.size(), 1.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        lp.objective[i] = d.atoms()[i].value / alpha;
        lp.upper[i] = d.atoms()[i].prob;
        lp.var_names[i] = "lambda" + std::to_string(i);
    }
    lp.add_row(std::move(ones), RowSense::eq, alpha, "mass");
    return lp;
}

/// One permutation-kernel constraint of the risky program at (x, a, sigma).
struct RiskyRow {
    StateId x = 0;
    ActionId a = 0;
    std::size_t sigma = 0;
    /// Coefficients on V1 and the constant right-hand side.
    std::vector<double> coeffs;
    double rhs = 0.0;
};

struct RiskyProgram {
    LpProblem lp;
    std::vector<RiskyRow> rows;
    std::vector<ConstrainedPermutation> permutations;
};

namespace detail {

inline void check_risky_inputs(const Mdp& mdp, double alpha, const std::vector<double>& nu0,
                               const std::vector<double>& v_star) {
    check_level(alpha, "risky LP");
    if (nu0.size() != mdp.n_states()) throw StructuralError("risky LP: nu0 must have one weight per state");
    double total = 0.0;
    for (double w : nu0) {
        if (!(w > 0.0)) throw DomainError("risky LP: nu0 must be positive in every state");
        total += w;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) throw DomainError("risky LP: nu0 must sum to 1");
    require_balanced(mdp, v_star);
}

/// V1(x) - gamma sum_x' [W(x') - alpha/(1-alpha) B(x')] V1(x') <= sum_x' (W + B) r + gamma/(1-alpha) sum_x' B V*(x'),
/// with W, B the worst-substate row of the permutation kernel split by successor mode.
inline std::vector<RiskyRow> risky_rows(const Mdp& mdp, double alpha, const std::vector<double>& v_star,
                                        const std::vector<ConstrainedPermutation>& perms) {
    const double gamma = mdp.gamma();
    std::vector<RiskyRow> out;
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) {
            for (std::size_t k = 0; k < perms.size(); ++k) {
                const KernelRows kr = permutation_rows(mdp, alpha, x, a, perms[k]);
                RiskyRow row{x, a, k, std::vector<double>(mdp.n_states(), 0.0), 0.0};
                row.coeffs[x] += 1.0;
                for (StateId y = 0; y < mdp.n_states(); ++y) {
                    const double w = kr.worst[worst_substate(y)];
                    const double b = kr.worst[best_substate(y)];
                    row.coeffs[y] -= gamma * (w - alpha / (1.0 - alpha) * b);
                    row.rhs += (w + b) * mdp.r(x, a, y) + gamma / (1.0 - alpha) * b * v_star[y];
                }
                out.push_back(std::move(row));
            }
        }
    }
    return out;
}

inline std::string risky_row_name(const Mdp& mdp, const RiskyRow& row) {
    return mdp.state_names()[row.x] + "_" + mdp.action_names()[row.a] + "_s" + std::to_string(row.sigma);
}

} // namespace detail

/// maximize (1 - gamma) <nu0, V1> over free V1, one row per (x, offered a, sigma).
inline RiskyProgram build_risky_primal(const Mdp& mdp, double alpha, const std::vector<double>& nu0,
                                       const std::vector<double>& v_star) {
    detail::check_risky_inputs(mdp, alpha, nu0, v_star);
    RiskyProgram out;
    out.permutations = enumerate_constrained_permutations(mdp.n_states());
    out.rows = detail::risky_rows(mdp, alpha, v_star, out.permutations);
    out.lp = LpProblem::with_variables(mdp.n_states(), ObjectiveSense::maximize);
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        out.lp.objective[x] = (1.0 - mdp.gamma()) * nu0[x];
        out.lp.lower[x] = -kInfinity;
        out.lp.var_names[x] = "V1_" + mdp.state_names()[x];
    }
    for (const RiskyRow& row : out.rows) {
        out.lp.add_row(row.coeffs, RowSense::le, row.rhs, detail::risky_row_name(mdp, row));
    }
    return out;
}

/// minimize sum p(x,a,sigma) rhs(x,a,sigma) over p >= 0 with one flow equality per state.
inline RiskyProgram build_risky_dual(const Mdp& mdp, double alpha, const std::vector<double>& nu0,
                                     const std::vector<double>& v_star) {
    detail::check_risky_inputs(mdp, alpha, nu0, v_star);
    RiskyProgram out;
    out.permutations = enumerate_constrained_permutations(mdp.n_states());
    out.rows = detail::risky_rows(mdp, alpha, v_star, out.permutations);
    out.lp = LpProblem::with_variables(out.rows.size(), ObjectiveSense::minimize);
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
        out.lp.objective[k] = out.rows[k].rhs;
        out.lp.var_names[k] = "p_" + detail::risky_row_name(mdp, out.rows[k]);
    }
    for (StateId y = 0; y < mdp.n_states(); ++y) {
        std::vector<double> coeffs(out.rows.size());
        for (std::size_t k = 0; k < out.rows.size(); ++k) coeffs[k] = out.rows[k].coeffs[y];
        out.lp.add_row(std::move(coeffs), RowSense::eq, (1.0 - mdp.gamma()) * nu0[y], "flow_" + mdp.state_names()[y]);
    }
    return out;
}

struct DualSupportEntry {
    StateId x = 0;
    ActionId a = 0;
    std::size_t sigma = 0;
    double mass = 0.0;
};

struct DualityReport {
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    std::vector<double> v1_lp;
    std::vector<double> v1_svi;
    double max_v1_deviation = 0.0;
    std::size_t primal_rows = 0;
    std::size_t dual_variables = 0;
    std::vector<DualSupportEntry> dual_support;
    LpSolution primal;
    LpSolution dual;
    bool passed = false;
};

inline constexpr double kDualityTolerance = 1e-7;

/// Solves both risky programs and compares them with each other and with Risky SVI.
inline DualityReport duality_gap_check(const Mdp& mdp, double alpha, const std::vector<double>& nu0,
                                       const IterationControl& control = {1e-12, 1'000'000}) {
    const ControlResult risky = svi(mdp, ControlMode::risky, alpha, control);
    const RiskyProgram primal = build_risky_primal(mdp, alpha, nu0, risky.v_star);
    const RiskyProgram dual = build_risky_dual(mdp, alpha, nu0, risky.v_star);
    DualityReport report;
    report.primal = solve(primal.lp);
    report.dual = solve(dual.lp);
    report.primal_rows = primal.lp.n_rows();
    report.dual_variables = dual.lp.n_vars();
    if (report.primal.status != LpStatus::optimal || report.dual.status != LpStatus::optimal) {
        throw PropertyFailure(std::string("risky LP: primal ") + to_string(report.primal.status) + ", dual " +
                              to_string(report.dual.status));
    }
    report.primal_objective = report.primal.objective_value;
    report.dual_objective = report.dual.objective_value;
    report.gap = std::abs(report.primal_objective - report.dual_objective);
    report.v1_lp = report.primal.x;
    report.v1_svi.assign(mdp.n_states(), 0.0);
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        double lo = kInfinity;
        for (ActionId a : mdp.actions(x)) lo = std::min(lo, risky.q1(x, a));
        report.v1_svi[x] = lo;
        report.max_v1_deviation = std::max(report.max_v1_deviation, std::abs(report.v1_lp[x] - lo));
    }
    for (std::size_t k = 0; k < dual.rows.size(); ++k) {
        if (report.dual.x[k] > 1e-9) {
            report.dual_support.push_back({dual.rows[k].x, dual.rows[k].a, dual.rows[k].sigma, report.dual.x[k]});
        }
    }
    report.passed = report.gap <= kDualityTolerance && report.max_v1_deviation <= kDualityTolerance;
    return report;
}

/// Writes the LP in a CPLEX-like plain-text form.
inline void write_lp_text(std::ostream& out, const LpProblem& lp) {
    auto term = [&](double c, const std::string& name, bool first) {
        if (first) {
            out << c << " " << name;
        } else {
            out << (c < 0 ? " - " : " + ") << std::abs(c) << " " << name;
        }
    };
    out.precision(17);
    out << (lp.sense == ObjectiveSense::maximize ? "Maximize\n" : "Minimize\n") << " obj: ";
    bool first = true;
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        if (lp.objective[j] == 0.0) continue;
        term(lp.objective[j], lp.var_names[j], first);
        first = false;
    }
    if (first) out << "0 " << lp.var_names.front();
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < lp.n_rows(); ++i) {
        out << " " << lp.row_names[i] << ": ";
        first = true;
        for (std::size_t j = 0; j < lp.n_vars(); ++j) {
            if (lp.rows[i][j] == 0.0) continue;
            term(lp.rows[i][j], lp.var_names[j], first);
            first = false;
        }
        if (first) out << "0 " << lp.var_names.front();
        const char* op = lp.senses[i] == RowSense::le ? " <= " : lp.senses[i] == RowSense::ge ? " >= " : " = ";
        out << op << lp.rhs[i] << "\n";
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < lp.n_vars(); ++j) {
        const bool lo = std::isfinite(lp.lower[j]);
        const bool hi = std::isfinite(lp.upper[j]);
        if (!lo && !hi) {
            out << " " << lp.var_names[j] << " free\n";
        } else if (!lo) {
            out << " -inf <= " << lp.var_names[j] << " <= " << lp.upper[j] << "\n";
        } else if (!hi) {
            out << " " << lp.var_names[j] << " >= " << lp.lower[j] << "\n";
        } else {
            out << " " << lp.lower[j] << " <= " << lp.var_names[j] << " <= " << lp.upper[j] << "\n";
        }
    }
    out << "End\n";
}

} // namespace diatomic
