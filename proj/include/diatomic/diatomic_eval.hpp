#pragma once

#include "diatomic/discrete_dist.hpp"
#include "diatomic/distributional_bellman.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/fixed_point.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/parallel.hpp"
#include "diatomic/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace diatomic {

/// Pair (Q1, Q2) of value tables at risk level alpha: the atoms of the
/// diatomic law alpha * delta(Q1(x,a)) + (1 - alpha) * delta(Q2(x,a)).
struct DoubleQ {
    QTable q1;
    QTable q2;
    double alpha = 0.5;

    static DoubleQ zeros(const Mdp& mdp, double alpha) {
        detail::check_level(alpha, "DoubleQ");
        return {QTable(mdp.n_states(), mdp.n_actions(), 0.0),
                QTable(mdp.n_states(), mdp.n_actions(), 0.0), alpha};
    }

    /// The diatomic distribution function D_{alpha, (Q1, Q2)}.
    DistFunction to_dist_function() const {
        DistFunction out(q1.n_states(), q1.n_actions());
        for (StateId x = 0; x < q1.n_states(); ++x) {
            for (ActionId a = 0; a < q1.n_actions(); ++a) {
                out(x, a) = DiscreteDist({{q1(x, a), alpha}, {q2(x, a), 1.0 - alpha}});
            }
        }
        return out;
    }
};

inline double sup_distance(const DoubleQ& lhs, const DoubleQ& rhs) {
    return std::max(sup_distance(lhs.q1, rhs.q1), sup_distance(lhs.q2, rhs.q2));
}

/**
 * Diatomic Bellman operator: one sorted-policy-evaluation sweep.
 *
 * For each (x, a) the 2|X||A| particles
 * (alpha_i P(x'|x,a) pi(a'|x'), r(x,a,x') + gamma Q_i(x',a')) are sorted by
 * value; Q1' is their left AVaR at alpha and Q2' their right AVaR at 1 - alpha.
 * Zero-probability particles are skipped.
 */
inline DoubleQ diatomic_bellman_apply(const Mdp& mdp, const Policy& policy, const DoubleQ& dq,
                                      std::size_t threads = 1) {
    check_policy(mdp, policy);
    check_table(mdp, dq.q1, "diatomic_bellman_apply");
    check_table(mdp, dq.q2, "diatomic_bellman_apply");
    detail::check_level(dq.alpha, "diatomic_bellman_apply");
    const double alpha = dq.alpha;
    const double gamma = mdp.gamma();
    const std::size_t n_x = mdp.n_states();
    const std::size_t n_a = mdp.n_actions();

    DoubleQ out{QTable(n_x, n_a), QTable(n_x, n_a), alpha};
    parallel_for(n_x * n_a, threads, [&](std::size_t idx) {
        const StateId x = idx / n_a;
        const ActionId a = idx % n_a;
        std::vector<Atom> particles;
        particles.reserve(2 * n_x * n_a);
        for (StateId y = 0; y < n_x; ++y) {
            const double p = mdp.p(x, a, y);
            if (p == 0.0) continue;
            const double reward = mdp.r(x, a, y);
            for (ActionId b = 0; b < n_a; ++b) {
                const double w = p * policy(y, b);
                if (w == 0.0) continue;
                particles.push_back({reward + gamma * dq.q1(y, b), alpha * w});
                particles.push_back({reward + gamma * dq.q2(y, b), (1.0 - alpha) * w});
            }
        }
        std::stable_sort(particles.begin(), particles.end(),
                         [](const Atom& l, const Atom& r) { return l.value < r.value; });
        out.q1(x, a) = left_avar_sorted(particles, alpha);
        out.q2(x, a) = right_avar_sorted(particles, alpha);
    });
    return out;
}

struct SpeStep {
    std::size_t iteration = 0;
    DoubleQ value;
    double residual = 0.0;
};

struct SpeResult {
    DoubleQ value;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    /// Every iterate, filled only when requested.
    std::vector<SpeStep> trace;
};

/// Sorted policy evaluation: iterates the diatomic operator from (0, 0) to its fixed point.
inline SpeResult spe(const Mdp& mdp, const Policy& policy, double alpha,
                     const IterationControl& control = {}, bool keep_trace = false,
                     std::size_t threads = 1) {
    check_policy(mdp, policy);
    SpeResult out;
    auto fp = iterate_to_fixed_point(
        DoubleQ::zeros(mdp, alpha),
        [&](const DoubleQ& dq) { return diatomic_bellman_apply(mdp, policy, dq, threads); },
        [](const DoubleQ& l, const DoubleQ& r) { return sup_distance(l, r); }, control,
        [&](std::size_t iter, const DoubleQ& dq, double residual) {
            if (keep_trace) out.trace.push_back({iter, dq, residual});
        },
        "spe");
    out.value = std::move(fp.value);
    out.residual = fp.residual;
    out.iterations = fp.iterations;
    out.converged = fp.converged;
    return out;
}

/// True iff Q^pi(x, .) is constant (both components, within tol) over each support.
inline bool is_alpha_coherent(const Mdp& mdp, const Policy& policy, const DoubleQ& fixed, double tol) {
    check_policy(mdp, policy);
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        const auto support = policy.support(x);
        for (ActionId a : support) {
            for (ActionId b : support) {
                if (std::abs(fixed.q1(x, a) - fixed.q1(x, b)) > tol ||
                    std::abs(fixed.q2(x, a) - fixed.q2(x, b)) > tol) {
                    return false;
                }
            }
        }
    }
    return true;
}

/// (V1, V2) with V_i(x) = sum_a pi(a|x) Q_i(x,a).
inline std::pair<std::vector<double>, std::vector<double>> bavar_state_values(const Policy& policy,
                                                                              const DoubleQ& dq) {
    return {state_values(dq.q1, policy), state_values(dq.q2, policy)};
}

} // namespace diatomic
