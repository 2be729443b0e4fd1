#pragma once

#include "diatomic/errors.hpp"
#include "diatomic/fixed_point.hpp"
#include "diatomic/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace diatomic {

/// Row sums within this distance of 1 are accepted as they are.
inline constexpr double kProbabilityTolerance = 1e-9;
/// Row sums off by less than this are renormalized; larger deviations are rejected.
inline constexpr double kRenormalizeTolerance = 1e-6;
/// Default tolerance deciding which actions tie for the maximum of Q*.
inline constexpr double kDefaultTieTolerance = 1e-8;

/**
 * Finite discounted MDP (states, actions, P(x'|x,a), r(x,a,x'), gamma).
 *
 * Transition and reward tables are stored densely, indexed by (x, a, x').
 * Every state carries the list of actions it offers; by default all of them.
 * A reduced MDP keeps the full tables and only shrinks these lists, so action
 * ids stay the original ones.
 */
class Mdp {
public:
    Mdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
        std::vector<double> reward, double gamma, std::vector<std::string> state_names = {},
        std::vector<std::string> action_names = {})
        : n_states_(n_states), n_actions_(n_actions), gamma_(gamma),
          transition_(std::move(transition)), reward_(std::move(reward)),
          state_names_(std::move(state_names)), action_names_(std::move(action_names)) {
        if (n_states_ == 0 || n_actions_ == 0) {
            throw StructuralError("Mdp: state and action sets must be non-empty");
        }
        const std::size_t expected = n_states_ * n_actions_ * n_states_;
        if (transition_.size() != expected || reward_.size() != expected) {
            throw StructuralError("Mdp: transition and reward tables must have |X|*|A|*|X| = " +
                                  std::to_string(expected) + " entries");
        }
        if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
            throw DomainError("Mdp: discount must lie in [0, 1), got " + std::to_string(gamma_));
        }
        for (double r : reward_) {
            if (!std::isfinite(r)) throw DomainError("Mdp: rewards must be finite");
        }
        for (StateId x = 0; x < n_states_; ++x) {
            for (ActionId a = 0; a < n_actions_; ++a) normalize_row(x, a);
        }
        if (state_names_.empty()) {
            for (StateId x = 0; x < n_states_; ++x) state_names_.push_back("x" + std::to_string(x + 1));
        }
        if (action_names_.empty()) {
            for (ActionId a = 0; a < n_actions_; ++a) action_names_.push_back("a" + std::to_string(a + 1));
        }
        if (state_names_.size() != n_states_ || action_names_.size() != n_actions_) {
            throw StructuralError("Mdp: name lists must match the state and action counts");
        }
        std::vector<ActionId> all(n_actions_);
        std::iota(all.begin(), all.end(), ActionId{0});
        offered_.assign(n_states_, all);
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double gamma() const noexcept { return gamma_; }

    double p(StateId x, ActionId a, StateId next) const { return transition_[index(x, a, next)]; }
    double r(StateId x, ActionId a, StateId next) const { return reward_[index(x, a, next)]; }

    std::span<const double> transition_row(StateId x, ActionId a) const {
        return {transition_.data() + index(x, a, 0), n_states_};
    }
    std::span<const double> reward_row(StateId x, ActionId a) const {
        return {reward_.data() + index(x, a, 0), n_states_};
    }
    const std::vector<double>& transitions() const noexcept { return transition_; }
    const std::vector<double>& rewards() const noexcept { return reward_; }

    /// Actions available in state x, sorted by original id.
    const std::vector<ActionId>& actions(StateId x) const { return offered_[x]; }
    bool offers(StateId x, ActionId a) const {
        return std::binary_search(offered_[x].begin(), offered_[x].end(), a);
    }
    bool all_actions_offered() const {
        return std::all_of(offered_.begin(), offered_.end(),
                           [&](const auto& list) { return list.size() == n_actions_; });
    }

    const std::vector<std::string>& state_names() const noexcept { return state_names_; }
    const std::vector<std::string>& action_names() const noexcept { return action_names_; }

    double max_abs_reward() const {
        double out = 0.0;
        for (double r : reward_) out = std::max(out, std::abs(r));
        return out;
    }

    /// Copy restricted to the given per-state action lists (original ids).
    Mdp restricted_to(std::vector<std::vector<ActionId>> offered) const {
        if (offered.size() != n_states_) {
            throw StructuralError("Mdp::restricted_to: one action list per state required");
        }
        for (auto& list : offered) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
            if (list.empty() || list.back() >= n_actions_) {
                throw StructuralError("Mdp::restricted_to: action lists must be non-empty valid ids");
            }
        }
        Mdp out = *this;
        out.offered_ = std::move(offered);
        return out;
    }

    /// Copy with the reward table replaced; offered actions are preserved.
    Mdp with_rewards(std::vector<double> reward) const {
        Mdp out(n_states_, n_actions_, transition_, std::move(reward), gamma_, state_names_,
                action_names_);
        out.offered_ = offered_;
        return out;
    }

    Mdp with_gamma(double gamma) const {
        Mdp out(n_states_, n_actions_, transition_, reward_, gamma, state_names_, action_names_);
        out.offered_ = offered_;
        return out;
    }

private:
    std::size_t index(StateId x, ActionId a, StateId next) const {
        return (x * n_actions_ + a) * n_states_ + next;
    }

    void normalize_row(StateId x, ActionId a) {
        double* row = transition_.data() + index(x, a, 0);
        double sum = 0.0;
        for (std::size_t k = 0; k < n_states_; ++k) {
            if (!(row[k] >= 0.0) || !std::isfinite(row[k])) {
                throw DomainError("Mdp: negative or non-finite probability P(" + std::to_string(k) +
                                  "|" + std::to_string(x) + "," + std::to_string(a) + ")");
            }
            sum += row[k];
        }
        const double deviation = std::abs(sum - 1.0);
        if (deviation <= kProbabilityTolerance) return;
        if (deviation >= kRenormalizeTolerance) {
            throw DomainError("Mdp: transition row (" + std::to_string(x) + "," + std::to_string(a) +
                              ") sums to " + std::to_string(sum));
        }
        for (std::size_t k = 0; k < n_states_; ++k) row[k] /= sum;
    }

    std::size_t n_states_;
    std::size_t n_actions_;
    double gamma_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    std::vector<std::string> state_names_;
    std::vector<std::string> action_names_;
    std::vector<std::vector<ActionId>> offered_;
};

/// Stationary Markovian policy pi(a|x).
class Policy {
public:
    explicit Policy(StateActionTable<double> probs) : probs_(std::move(probs)) {
        for (StateId x = 0; x < probs_.n_states(); ++x) {
            double sum = 0.0;
            for (double p : probs_.row(x)) {
                if (!(p >= 0.0)) throw DomainError("Policy: probabilities must be non-negative");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kProbabilityTolerance) {
                throw DomainError("Policy: row " + std::to_string(x) + " sums to " + std::to_string(sum));
            }
        }
    }

    /// Uniform over the actions each state offers.
    static Policy uniform(const Mdp& mdp) {
        StateActionTable<double> probs(mdp.n_states(), mdp.n_actions(), 0.0);
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            const auto& acts = mdp.actions(x);
            for (ActionId a : acts) probs(x, a) = 1.0 / static_cast<double>(acts.size());
        }
        return Policy(std::move(probs));
    }

    static Policy deterministic(const Mdp& mdp, const std::vector<ActionId>& choice) {
        if (choice.size() != mdp.n_states()) {
            throw StructuralError("Policy::deterministic: one action per state required");
        }
        StateActionTable<double> probs(mdp.n_states(), mdp.n_actions(), 0.0);
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            if (choice[x] >= mdp.n_actions()) throw StructuralError("Policy::deterministic: bad action id");
            probs(x, choice[x]) = 1.0;
        }
        return Policy(std::move(probs));
    }

    static Policy always(const Mdp& mdp, ActionId a) {
        return deterministic(mdp, std::vector<ActionId>(mdp.n_states(), a));
    }

    std::size_t n_states() const noexcept { return probs_.n_states(); }
    std::size_t n_actions() const noexcept { return probs_.n_actions(); }
    double operator()(StateId x, ActionId a) const { return probs_(x, a); }
    const StateActionTable<double>& table() const noexcept { return probs_; }

    std::vector<ActionId> support(StateId x) const {
        std::vector<ActionId> out;
        for (ActionId a = 0; a < n_actions(); ++a) {
            if (probs_(x, a) > 0.0) out.push_back(a);
        }
        return out;
    }

    bool is_deterministic() const {
        for (StateId x = 0; x < n_states(); ++x) {
            if (support(x).size() != 1) return false;
        }
        return true;
    }

private:
    StateActionTable<double> probs_;
};

/// Throws StructuralError when shapes differ and PreconditionError when the
/// policy puts mass on an action the MDP does not offer.
inline void check_policy(const Mdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
        throw StructuralError("policy shape does not match the MDP");
    }
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            if (policy(x, a) > 0.0 && !mdp.offers(x, a)) {
                throw PreconditionError("policy puts mass on action " + mdp.action_names()[a] +
                                        " which state " + mdp.state_names()[x] + " does not offer");
            }
        }
    }
}

inline void check_table(const Mdp& mdp, const QTable& q, const char* what) {
    if (q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions()) {
        throw StructuralError(std::string(what) + ": table shape does not match the MDP");
    }
}

/// V(x) = sum_a pi(a|x) Q(x,a).
inline std::vector<double> state_values(const QTable& q, const Policy& policy) {
    require_same_shape(q, policy.table(), "state_values");
    std::vector<double> v(q.n_states(), 0.0);
    for (StateId x = 0; x < q.n_states(); ++x) {
        for (ActionId a = 0; a < q.n_actions(); ++a) v[x] += policy(x, a) * q(x, a);
    }
    return v;
}

/// V(x) = max over offered actions of Q(x,a).
inline std::vector<double> greedy_values(const Mdp& mdp, const QTable& q) {
    check_table(mdp, q, "greedy_values");
    std::vector<double> v(mdp.n_states(), -std::numeric_limits<double>::infinity());
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) v[x] = std::max(v[x], q(x, a));
    }
    return v;
}

/// One-step lookahead sum_x' P(x'|x,a) (r(x,a,x') + gamma v(x')) for every pair.
inline QTable lookahead(const Mdp& mdp, const std::vector<double>& v) {
    if (v.size() != mdp.n_states()) throw StructuralError("lookahead: value vector size mismatch");
    QTable out(mdp.n_states(), mdp.n_actions(), 0.0);
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            const auto p = mdp.transition_row(x, a);
            const auto r = mdp.reward_row(x, a);
            double acc = 0.0;
            for (StateId y = 0; y < mdp.n_states(); ++y) acc += p[y] * (r[y] + mdp.gamma() * v[y]);
            out(x, a) = acc;
        }
    }
    return out;
}

/// Q'(x,a) = sum_{x',a'} P(x'|x,a) pi(a'|x') (r(x,a,x') + gamma Q(x',a')).
inline QTable bellman_policy_op(const Mdp& mdp, const Policy& policy, const QTable& q) {
    check_policy(mdp, policy);
    check_table(mdp, q, "bellman_policy_op");
    return lookahead(mdp, state_values(q, policy));
}

/// Q'(x,a) = sum_x' P(x'|x,a) (r(x,a,x') + gamma max_a' Q(x',a')), max over offered actions.
inline QTable bellman_optimality_op(const Mdp& mdp, const QTable& q) {
    return lookahead(mdp, greedy_values(mdp, q));
}

inline FixedPoint<QTable> evaluate_policy(const Mdp& mdp, const Policy& policy,
                                          const IterationControl& control = {}) {
    check_policy(mdp, policy);
    return iterate_to_fixed_point(
        QTable(mdp.n_states(), mdp.n_actions(), 0.0),
        [&](const QTable& q) { return lookahead(mdp, state_values(q, policy)); },
        [](const QTable& lhs, const QTable& rhs) { return sup_distance(lhs, rhs); }, control,
        "evaluate_policy");
}

inline FixedPoint<QTable> value_iteration(const Mdp& mdp, const IterationControl& control = {}) {
    return iterate_to_fixed_point(
        QTable(mdp.n_states(), mdp.n_actions(), 0.0),
        [&](const QTable& q) { return bellman_optimality_op(mdp, q); },
        [](const QTable& lhs, const QTable& rhs) { return sup_distance(lhs, rhs); }, control,
        "value_iteration");
}

/// A*(x) = {a offered in x : Q*(x,a) >= max_b Q*(x,b) - tie_tol}.
inline std::vector<std::vector<ActionId>> optimal_action_sets(const Mdp& mdp, const QTable& q_star,
                                                             double tie_tol = kDefaultTieTolerance) {
    if (!(tie_tol >= 0.0)) throw DomainError("optimal_action_sets: tie_tol must be >= 0");
    const auto best = greedy_values(mdp, q_star);
    std::vector<std::vector<ActionId>> out(mdp.n_states());
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) {
            if (q_star(x, a) >= best[x] - tie_tol) out[x].push_back(a);
        }
    }
    return out;
}

struct BalancedReduction {
    Mdp mdp;
    /// Original ids of the actions kept in each state.
    std::vector<std::vector<ActionId>> kept_actions;
};

inline BalancedReduction reduce_to_balanced(const Mdp& mdp, double tie_tol = kDefaultTieTolerance) {
    const auto q_star = value_iteration(mdp, {1e-12, 100'000}).value;
    auto kept = optimal_action_sets(mdp, q_star, tie_tol);
    return {mdp.restricted_to(kept), kept};
}

/// Largest |Q(x,a) - Q(x,b)| over offered action pairs, with the triple attaining it.
struct BalanceGap {
    double gap = 0.0;
    StateId state = 0;
    ActionId first = 0;
    ActionId second = 0;
};

inline BalanceGap balance_gap(const Mdp& mdp, const QTable& q) {
    BalanceGap out;
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        const auto& acts = mdp.actions(x);
        for (ActionId a : acts) {
            for (ActionId b : acts) {
                const double gap = std::abs(q(x, a) - q(x, b));
                if (gap > out.gap) out = {gap, x, a, b};
            }
        }
    }
    return out;
}

/// True iff max_{x,a,b} |Q*(x,a) - Q*(x,b)| <= tol over offered actions.
inline bool is_balanced(const Mdp& mdp, double tol) {
    const auto q_star = value_iteration(mdp, {1e-12, 100'000}).value;
    return balance_gap(mdp, q_star).gap <= tol;
}

} // namespace diatomic
