#pragma once

#include "diatomic/diatomic_eval.hpp"
#include "diatomic/discrete_dist.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/fixed_point.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace diatomic {

/// Tolerance of the balanced-MDP precondition of the safe and risky operators.
inline constexpr double kBalanceTolerance = 1e-6;

enum class ControlMode { safe, risky };

inline const char* to_string(ControlMode mode) { return mode == ControlMode::safe ? "safe" : "risky"; }

/// Throws PreconditionError naming (x, a, b) when two offered actions disagree
/// on the one-step lookahead of v_star by more than kBalanceTolerance.
inline void require_balanced(const Mdp& mdp, const std::vector<double>& v_star) {
    if (v_star.size() != mdp.n_states()) throw StructuralError("v_star size does not match the MDP");
    const QTable q = lookahead(mdp, v_star);
    const BalanceGap gap = balance_gap(mdp, q);
    if (gap.gap > kBalanceTolerance) {
        throw PreconditionError("MDP is not balanced: |Q*(" + mdp.state_names()[gap.state] + "," +
                                mdp.action_names()[gap.first] + ") - Q*(" + mdp.state_names()[gap.state] +
                                "," + mdp.action_names()[gap.second] + ")| = " + std::to_string(gap.gap));
    }
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) {
            if (std::abs(q(x, a) - v_star[x]) > kBalanceTolerance) {
                throw PreconditionError("v_star is not the optimal value at state " + mdp.state_names()[x]);
            }
        }
    }
}

/// Q2 = (V* - alpha Q1) / (1 - alpha), the partner table forced by balance.
inline QTable partner_table(const std::vector<double>& v_star, double alpha, const QTable& q1) {
    QTable q2 = q1;
    for (StateId x = 0; x < q1.n_states(); ++x) {
        for (ActionId a = 0; a < q1.n_actions(); ++a) q2(x, a) = (v_star[x] - alpha * q1(x, a)) / (1.0 - alpha);
    }
    return q2;
}

namespace detail {

inline QTable control_step(const Mdp& mdp, const std::vector<double>& v_star, double alpha,
                           const QTable& q1, ControlMode mode) {
    const std::size_t n_x = mdp.n_states();
    const bool safe = mode == ControlMode::safe;
    std::vector<double> v1(n_x), v2(n_x);
    for (StateId y = 0; y < n_x; ++y) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (ActionId b : mdp.actions(y)) {
            lo = std::min(lo, q1(y, b));
            hi = std::max(hi, q1(y, b));
        }
        // Q2 is decreasing in Q1, so its min (max) sits at the max (min) of Q1.
        v1[y] = safe ? hi : lo;
        v2[y] = (v_star[y] - alpha * v1[y]) / (1.0 - alpha);
    }
    QTable out(n_x, mdp.n_actions());
    std::vector<Atom> particles;
    particles.reserve(2 * n_x);
    for (StateId x = 0; x < n_x; ++x) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            particles.clear();
            for (StateId y = 0; y < n_x; ++y) {
                const double p = mdp.p(x, a, y);
                if (p == 0.0) continue;
                const double reward = mdp.r(x, a, y);
                particles.push_back({reward + mdp.gamma() * v1[y], alpha * p});
                particles.push_back({reward + mdp.gamma() * v2[y], (1.0 - alpha) * p});
            }
            std::stable_sort(particles.begin(), particles.end(),
                             [](const Atom& l, const Atom& r) { return l.value < r.value; });
            out(x, a) = left_avar_sorted(particles, alpha);
        }
    }
    return out;
}

inline void check_control_inputs(const Mdp& mdp, const std::vector<double>& v_star, double alpha,
                                 const QTable& q1) {
    detail::check_level(alpha, "risk control");
    check_table(mdp, q1, "risk control");
    require_balanced(mdp, v_star);
}

} // namespace detail

/// Safe operator: V1 = max_a Q1, V2 = min_a Q2, then the left AVaR of the 2|X| particles.
inline QTable safe_bellman_apply(const Mdp& mdp, const std::vector<double>& v_star, double alpha,
                                 const QTable& q1) {
    detail::check_control_inputs(mdp, v_star, alpha, q1);
    return detail::control_step(mdp, v_star, alpha, q1, ControlMode::safe);
}

/// Risky operator: V1 = min_a Q1, V2 = max_a Q2, then the left AVaR of the 2|X| particles.
inline QTable risky_bellman_apply(const Mdp& mdp, const std::vector<double>& v_star, double alpha,
                                  const QTable& q1) {
    detail::check_control_inputs(mdp, v_star, alpha, q1);
    return detail::control_step(mdp, v_star, alpha, q1, ControlMode::risky);
}

inline QTable control_apply(const Mdp& mdp, const std::vector<double>& v_star, double alpha,
                            const QTable& q1, ControlMode mode) {
    return mode == ControlMode::safe ? safe_bellman_apply(mdp, v_star, alpha, q1)
                                     : risky_bellman_apply(mdp, v_star, alpha, q1);
}

/// V* from value iteration at tolerance 1e-12.
inline std::vector<double> optimal_values(const Mdp& mdp) {
    return greedy_values(mdp, value_iteration(mdp, {1e-12, 1'000'000}).value);
}

struct ControlStep {
    std::size_t iteration = 0;
    QTable q1;
    QTable q2;
    double residual = 0.0;
};

struct ControlResult {
    QTable q1;
    QTable q2;
    ControlMode mode = ControlMode::safe;
    double alpha = 0.5;
    /// Safest (argmax Q1) or riskiest (argmin Q1) offered actions per state.
    std::vector<std::vector<ActionId>> action_sets;
    std::vector<double> v_star;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    std::vector<ControlStep> trace;
};

/// Actions within tie_tol of the extremum of Q1: max for safe, min for risky.
inline std::vector<std::vector<ActionId>> extremal_action_sets(const Mdp& mdp, const QTable& q1,
                                                              ControlMode mode,
                                                              double tie_tol = kDefaultTieTolerance) {
    std::vector<std::vector<ActionId>> out(mdp.n_states());
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        double best = mode == ControlMode::safe ? -std::numeric_limits<double>::infinity()
                                                : std::numeric_limits<double>::infinity();
        for (ActionId a : mdp.actions(x)) {
            best = mode == ControlMode::safe ? std::max(best, q1(x, a)) : std::min(best, q1(x, a));
        }
        for (ActionId a : mdp.actions(x)) {
            if (std::abs(q1(x, a) - best) <= tie_tol) out[x].push_back(a);
        }
    }
    return out;
}

/// Safe/risky sorted value iteration from Q1 = 0 on a balanced MDP.
inline ControlResult svi(const Mdp& mdp, ControlMode mode, double alpha, const IterationControl& control = {},
                         bool keep_trace = false) {
    detail::check_level(alpha, "svi");
    ControlResult out;
    out.mode = mode;
    out.alpha = alpha;
    out.v_star = optimal_values(mdp);
    require_balanced(mdp, out.v_star);
    auto fp = iterate_to_fixed_point(
        QTable(mdp.n_states(), mdp.n_actions(), 0.0),
        [&](const QTable& q1) { return detail::control_step(mdp, out.v_star, alpha, q1, mode); },
        [](const QTable& l, const QTable& r) { return sup_distance(l, r); }, control,
        [&](std::size_t iter, const QTable& q1, double residual) {
            if (keep_trace) out.trace.push_back({iter, q1, partner_table(out.v_star, alpha, q1), residual});
        },
        std::string(to_string(mode)) + " svi");
    out.q1 = std::move(fp.value);
    out.q2 = partner_table(out.v_star, alpha, out.q1);
    out.residual = fp.residual;
    out.iterations = fp.iterations;
    out.converged = fp.converged;
    out.action_sets = extremal_action_sets(mdp, out.q1, mode);
    return out;
}

/// Deterministic policy choosing the lowest-id action of each extremal set.
inline Policy representative_policy(const Mdp& mdp, const ControlResult& result) {
    std::vector<ActionId> choice(mdp.n_states());
    for (StateId x = 0; x < mdp.n_states(); ++x) choice[x] = result.action_sets[x].front();
    return Policy::deterministic(mdp, choice);
}

/// Every deterministic policy over the offered actions, in lexicographic order
/// (state 0 varies slowest). Returns nothing when there are more than `limit`.
inline std::optional<std::vector<std::vector<ActionId>>> enumerate_deterministic(const Mdp& mdp,
                                                                                std::size_t limit) {
    std::size_t count = 1;
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        count *= mdp.actions(x).size();
        if (count > limit) return std::nullopt;
    }
    std::vector<std::vector<ActionId>> out;
    out.reserve(count);
    std::vector<std::size_t> digit(mdp.n_states(), 0);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<ActionId> choice(mdp.n_states());
        for (StateId x = 0; x < mdp.n_states(); ++x) choice[x] = mdp.actions(x)[digit[x]];
        out.push_back(std::move(choice));
        for (std::size_t x = mdp.n_states(); x-- > 0;) {
            if (++digit[x] < mdp.actions(x).size()) break;
            digit[x] = 0;
        }
    }
    return out;
}

/// Random stationary policy over the offered actions with exponential weights.
inline Policy random_policy(const Mdp& mdp, std::mt19937_64& rng) {
    std::exponential_distribution<double> weight(1.0);
    StateActionTable<double> probs(mdp.n_states(), mdp.n_actions(), 0.0);
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        double total = 0.0;
        for (ActionId a : mdp.actions(x)) total += probs(x, a) = weight(rng);
        for (ActionId a : mdp.actions(x)) probs(x, a) /= total;
    }
    return Policy(std::move(probs));
}

struct CertificateReport {
    std::size_t policies_checked = 0;
    std::size_t deterministic_checked = 0;
    /// Largest amount by which some policy beats the claimed extremum (<= 0 is fine).
    double max_violation = -std::numeric_limits<double>::infinity();
    bool passed = true;
    std::optional<Policy> offending;
    /// Deterministic policy whose Q1 is closest to the extremum, and that distance.
    std::vector<ActionId> closest_deterministic;
    double closest_gap = std::numeric_limits<double>::infinity();
};

inline constexpr double kCertificateTolerance = 1e-8;
inline constexpr std::size_t kDeterministicEnumerationLimit = 4096;

/**
 * Checks Q1^pi <= Q1^safe (safe) or Q1^pi >= Q1^risky (risky) entrywise for
 * every deterministic policy (when at most 4096 exist) and `n_policies`
 * random stationary ones, each evaluated by SPE.
 */
inline CertificateReport optimality_certificate(const Mdp& mdp, const ControlResult& result,
                                                std::size_t n_policies, std::uint64_t seed) {
    CertificateReport report;
    const IterationControl tight{1e-12, 1'000'000};
    auto check = [&](const Policy& policy, const std::vector<ActionId>* choice) {
        const QTable q1 = spe(mdp, policy, result.alpha, tight).value.q1;
        double violation = -std::numeric_limits<double>::infinity();
        double gap = 0.0;
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            for (ActionId a : mdp.actions(x)) {
                const double d = q1(x, a) - result.q1(x, a);
                violation = std::max(violation, result.mode == ControlMode::safe ? d : -d);
                gap = std::max(gap, std::abs(d));
            }
        }
        ++report.policies_checked;
        if (violation > report.max_violation) report.max_violation = violation;
        if (violation > kCertificateTolerance && !report.offending) report.offending = policy;
        if (choice != nullptr) {
            ++report.deterministic_checked;
            if (gap < report.closest_gap) {
                report.closest_gap = gap;
                report.closest_deterministic = *choice;
            }
        }
    };
    if (auto all = enumerate_deterministic(mdp, kDeterministicEnumerationLimit)) {
        for (const auto& choice : *all) check(Policy::deterministic(mdp, choice), &choice);
    }
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < n_policies; ++k) check(random_policy(mdp, rng), nullptr);
    report.passed = !report.offending.has_value();
    return report;
}

} // namespace diatomic
