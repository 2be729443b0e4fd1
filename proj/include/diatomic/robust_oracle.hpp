#pragma once

#include "diatomic/diatomic_eval.hpp"
#include "diatomic/distributional_bellman.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/fixed_point.hpp"
#include "diatomic/linear_solve.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/table.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace diatomic {

/// Augmented state ids: x splits into the worst substate 2x and the best substate 2x+1.
constexpr std::size_t worst_substate(StateId x) noexcept { return 2 * x; }
constexpr std::size_t best_substate(StateId x) noexcept { return 2 * x + 1; }
constexpr StateId original_state(std::size_t s) noexcept { return s / 2; }
constexpr bool is_worst_substate(std::size_t s) noexcept { return s % 2 == 0; }

inline constexpr std::size_t kPermutationStateCap = 4;
inline constexpr std::size_t kKernelCandidateCap = 2'000'000;

/// Transition kernel over the augmented states, indexed (s, a, s').
class AugmentedKernel {
public:
    AugmentedKernel(std::size_t n_states, std::size_t n_actions, std::vector<double> probs)
        : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
        const std::size_t n = 2 * n_states_;
        if (n_states_ == 0 || n_actions_ == 0 || probs_.size() != n * n_actions_ * n) {
            throw StructuralError("AugmentedKernel: table must have 2|X| * |A| * 2|X| entries");
        }
        for (std::size_t s = 0; s < n; ++s) {
            for (ActionId a = 0; a < n_actions_; ++a) {
                double sum = 0.0;
                for (std::size_t t = 0; t < n; ++t) {
                    const double p = (*this)(s, a, t);
                    if (!(p >= -kProbabilityTolerance)) {
                        throw DomainError("AugmentedKernel: negative entry in row (" + std::to_string(s) + "," +
                                          std::to_string(a) + ")");
                    }
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kProbabilityTolerance) {
                    throw DomainError("AugmentedKernel: row (" + std::to_string(s) + "," + std::to_string(a) +
                                      ") sums to " + std::to_string(sum));
                }
            }
        }
    }

    /// Both substates move to x' as alpha P / (1 - alpha) P, ignoring their own mode.
    static AugmentedKernel risk_neutral(const Mdp& mdp, double alpha) {
        detail::check_level(alpha, "risk_neutral kernel");
        const std::size_t n = 2 * mdp.n_states();
        std::vector<double> probs(n * mdp.n_actions() * n, 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            for (ActionId a = 0; a < mdp.n_actions(); ++a) {
                for (StateId y = 0; y < mdp.n_states(); ++y) {
                    const double p = mdp.p(original_state(s), a, y);
                    probs[(s * mdp.n_actions() + a) * n + worst_substate(y)] = alpha * p;
                    probs[(s * mdp.n_actions() + a) * n + best_substate(y)] = (1.0 - alpha) * p;
                }
            }
        }
        return AugmentedKernel(mdp.n_states(), mdp.n_actions(), std::move(probs));
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_augmented() const noexcept { return 2 * n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    double operator()(std::size_t s, ActionId a, std::size_t next) const {
        return probs_[(s * n_actions_ + a) * n_augmented() + next];
    }

    std::span<const double> row(std::size_t s, ActionId a) const {
        return {probs_.data() + (s * n_actions_ + a) * n_augmented(), n_augmented()};
    }

    const std::vector<double>& probs() const noexcept { return probs_; }

    /// Exchanges the roles of every worst and best substate, on both ends.
    AugmentedKernel swapped_substates() const {
        const std::size_t n = n_augmented();
        auto flip = [](std::size_t s) { return s ^ std::size_t{1}; };
        std::vector<double> out(probs_.size());
        for (std::size_t s = 0; s < n; ++s) {
            for (ActionId a = 0; a < n_actions_; ++a) {
                for (std::size_t t = 0; t < n; ++t) out[(flip(s) * n_actions_ + a) * n + flip(t)] = (*this)(s, a, t);
            }
        }
        return AugmentedKernel(n_states_, n_actions_, std::move(out));
    }

    bool operator==(const AugmentedKernel&) const = default;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<double> probs_;
};

/// A bijection from augmented states to ranks 0..2|X|-1 that ranks every
/// worst substate before its best partner.
class ConstrainedPermutation {
public:
    explicit ConstrainedPermutation(std::vector<std::size_t> rank) : rank_(std::move(rank)) {
        const std::size_t n = rank_.size();
        if (n == 0 || n % 2 != 0) throw StructuralError("ConstrainedPermutation: size must be 2|X| > 0");
        std::vector<bool> seen(n, false);
        for (std::size_t r : rank_) {
            if (r >= n || seen[r]) throw StructuralError("ConstrainedPermutation: ranks must form a bijection");
            seen[r] = true;
        }
        for (StateId x = 0; x < n / 2; ++x) {
            if (rank_[worst_substate(x)] > rank_[best_substate(x)]) {
                throw StructuralError("ConstrainedPermutation: worst substate of state " + std::to_string(x) +
                                      " must be ranked first");
            }
        }
    }

    /// Builds the permutation from augmented states listed in increasing rank.
    static ConstrainedPermutation from_order(const std::vector<std::size_t>& order) {
        std::vector<std::size_t> rank(order.size(), order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i] >= order.size()) throw StructuralError("ConstrainedPermutation: state out of range");
            rank[order[i]] = i;
        }
        return ConstrainedPermutation(std::move(rank));
    }

    /// Stable ascending sort of per-augmented-state values.
    static ConstrainedPermutation sorting(const std::vector<double>& values) {
        std::vector<std::size_t> order(values.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
        return from_order(order);
    }

    std::size_t rank(std::size_t s) const { return rank_[s]; }
    std::size_t size() const noexcept { return rank_.size(); }
    const std::vector<std::size_t>& ranks() const noexcept { return rank_; }

    std::vector<std::size_t> order() const {
        std::vector<std::size_t> out(rank_.size());
        for (std::size_t s = 0; s < rank_.size(); ++s) out[rank_[s]] = s;
        return out;
    }

    bool operator==(const ConstrainedPermutation&) const = default;

private:
    std::vector<std::size_t> rank_;
};

/// All constrained permutations over 2 * n_states augmented states; there are (2n)! / 2^n.
inline std::vector<ConstrainedPermutation> enumerate_constrained_permutations(
    std::size_t n_states, std::size_t cap = kPermutationStateCap) {
    if (n_states == 0) throw StructuralError("enumerate_constrained_permutations: need at least one state");
    if (n_states > cap) {
        throw ResourceError("enumerate_constrained_permutations: " + std::to_string(n_states) +
                            " states exceed the cap of " + std::to_string(cap));
    }
    // Each arrangement of the multiset {0,0,1,1,...} fixes one order: the first
    // occurrence of x stands for its worst substate, the second for its best.
    std::vector<StateId> word;
    for (StateId x = 0; x < n_states; ++x) word.insert(word.end(), 2, x);
    std::vector<ConstrainedPermutation> out;
    do {
        std::vector<bool> opened(n_states, false);
        std::vector<std::size_t> order;
        order.reserve(word.size());
        for (StateId x : word) {
            order.push_back(opened[x] ? best_substate(x) : worst_substate(x));
            opened[x] = true;
        }
        out.push_back(ConstrainedPermutation::from_order(order));
    } while (std::next_permutation(word.begin(), word.end()));
    return out;
}

/// Worst- and best-substate rows of the permutation kernel at (x, a).
struct KernelRows {
    std::vector<double> worst;
    std::vector<double> best;
    bool operator==(const KernelRows&) const = default;
};

inline KernelRows permutation_rows(const Mdp& mdp, double alpha, StateId x, ActionId a,
                                   const ConstrainedPermutation& sigma) {
    const std::size_t n = 2 * mdp.n_states();
    if (sigma.size() != n) throw StructuralError("permutation_rows: permutation size must be 2|X|");
    auto mass = [&](std::size_t s) {
        const double p = mdp.p(x, a, original_state(s));
        return is_worst_substate(s) ? alpha * p : (1.0 - alpha) * p;
    };
    KernelRows rows{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    double below = 0.0;
    for (std::size_t s : sigma.order()) {
        const double p = mass(s);
        rows.worst[s] = std::max(0.0, std::min(p, alpha - below)) / alpha;
        rows.best[s] = std::max(0.0, std::min(p, below + p - alpha)) / (1.0 - alpha);
        below += p;
    }
    return rows;
}

/// The permutation kernel of sigma, applied at every (x, a).
inline AugmentedKernel permutation_kernel(const Mdp& mdp, double alpha, const ConstrainedPermutation& sigma) {
    detail::check_level(alpha, "permutation_kernel");
    const std::size_t n = 2 * mdp.n_states();
    const std::size_t n_a = mdp.n_actions();
    std::vector<double> probs(n * n_a * n, 0.0);
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a = 0; a < n_a; ++a) {
            const KernelRows rows = permutation_rows(mdp, alpha, x, a, sigma);
            std::copy(rows.worst.begin(), rows.worst.end(), probs.begin() + (worst_substate(x) * n_a + a) * n);
            std::copy(rows.best.begin(), rows.best.end(), probs.begin() + (best_substate(x) * n_a + a) * n);
        }
    }
    return AugmentedKernel(mdp.n_states(), n_a, std::move(probs));
}

struct UncertaintyReport {
    bool member = true;
    double max_violation = 0.0;
    std::vector<std::string> violations;
    explicit operator bool() const noexcept { return member; }
};

/// Checks the two marginal equalities and the same-mode priority inequality
/// at every (x, a, x').
inline UncertaintyReport in_uncertainty_set(const Mdp& mdp, double alpha, const AugmentedKernel& kernel,
                                            double tol = 1e-9) {
    detail::check_level(alpha, "in_uncertainty_set");
    if (kernel.n_states() != mdp.n_states() || kernel.n_actions() != mdp.n_actions()) {
        throw StructuralError("in_uncertainty_set: kernel shape does not match the MDP");
    }
    UncertaintyReport report;
    auto record = [&](double excess, const char* name, StateId x, ActionId a, StateId y) {
        report.max_violation = std::max(report.max_violation, excess);
        if (excess > tol) {
            report.member = false;
            report.violations.push_back(std::string(name) + "(" + mdp.state_names()[x] + "," +
                                        mdp.action_names()[a] + "," + mdp.state_names()[y] +
                                        "): off by " + std::to_string(excess));
        }
    };
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        const std::size_t lo = worst_substate(x);
        const std::size_t hi = best_substate(x);
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            for (StateId y = 0; y < mdp.n_states(); ++y) {
                const std::size_t y_lo = worst_substate(y);
                const std::size_t y_hi = best_substate(y);
                const double p = mdp.p(x, a, y);
                record(std::abs(alpha * kernel(lo, a, y_lo) + (1.0 - alpha) * kernel(hi, a, y_lo) - alpha * p),
                       "worst-marginal", x, a, y);
                record(std::abs(alpha * kernel(lo, a, y_hi) + (1.0 - alpha) * kernel(hi, a, y_hi) -
                                (1.0 - alpha) * p),
                       "best-marginal", x, a, y);
                record(alpha / (1.0 - alpha) * kernel(lo, a, y_hi) - kernel(lo, a, y_lo), "priority", x, a, y);
            }
        }
    }
    return report;
}

/// The MDP over augmented states driven by `kernel`, with rewards and offered
/// actions copied from the original state regardless of substate.
inline Mdp lift(const Mdp& mdp, const AugmentedKernel& kernel) {
    const std::size_t n = kernel.n_augmented();
    const std::size_t n_a = mdp.n_actions();
    std::vector<double> reward(n * n_a * n);
    for (std::size_t s = 0; s < n; ++s) {
        for (ActionId a = 0; a < n_a; ++a) {
            for (std::size_t t = 0; t < n; ++t) {
                reward[(s * n_a + a) * n + t] = mdp.r(original_state(s), a, original_state(t));
            }
        }
    }
    std::vector<std::string> names;
    std::vector<std::vector<ActionId>> offered;
    for (std::size_t s = 0; s < n; ++s) {
        names.push_back(mdp.state_names()[original_state(s)] + (is_worst_substate(s) ? "_worst" : "_best"));
        offered.push_back(mdp.actions(original_state(s)));
    }
    Mdp out(n, n_a, kernel.probs(), std::move(reward), mdp.gamma(), std::move(names), mdp.action_names());
    return out.restricted_to(std::move(offered));
}

inline Policy lift(const Policy& policy) {
    StateActionTable<double> probs(2 * policy.n_states(), policy.n_actions(), 0.0);
    for (std::size_t s = 0; s < probs.n_states(); ++s) {
        for (ActionId a = 0; a < policy.n_actions(); ++a) probs(s, a) = policy(original_state(s), a);
    }
    return Policy(std::move(probs));
}

/// Classic policy evaluation in the augmented MDP; returns V over augmented states.
inline FixedPoint<std::vector<double>> augmented_policy_eval(const Mdp& mdp, const Policy& policy,
                                                             const AugmentedKernel& kernel,
                                                             const IterationControl& control = {}) {
    check_policy(mdp, policy);
    if (kernel.n_states() != mdp.n_states() || kernel.n_actions() != mdp.n_actions()) {
        throw StructuralError("augmented_policy_eval: kernel shape does not match the MDP");
    }
    const Policy lifted_policy = lift(policy);
    auto q = evaluate_policy(lift(mdp, kernel), lifted_policy, control);
    return {state_values(q.value, lifted_policy), q.residual, q.iterations, q.converged};
}

struct WorstBestResult {
    std::vector<double> v_worst;
    std::vector<double> v_best;
    /// (V1, V2) of the same policy from SPE, and the largest disagreement.
    std::vector<double> spe_v1;
    std::vector<double> spe_v2;
    double max_deviation = 0.0;
    /// First candidate (in enumeration order) attaining every inf and sup at once.
    std::optional<AugmentedKernel> kernel;
    bool common_kernel = false;
    /// More than one distinct candidate attains them.
    bool tied = false;
    std::size_t candidates = 0;
};

struct WorstBestOptions {
    std::size_t state_cap = kPermutationStateCap;
    std::size_t candidate_cap = kKernelCandidateCap;
    double coherence_tol = 1e-8;
    double attain_tol = 1e-9;
};

namespace detail {

inline DoubleQ tight_spe(const Mdp& mdp, const Policy& policy, double alpha) {
    return spe(mdp, policy, alpha, {1e-12, 1'000'000}).value;
}

inline void require_alpha_coherent(const Mdp& mdp, const Policy& policy, const DoubleQ& fixed, double tol,
                                   const char* what) {
    if (!is_alpha_coherent(mdp, policy, fixed, tol)) {
        throw PreconditionError(std::string(what) + ": policy is not alpha-coherent");
    }
}

} // namespace detail

/**
 * Brute-force worst and best values over kernels assembled from permutation
 * rows: every support pair (x, a) picks one constrained permutation, the other
 * rows stay risk-neutral. Each candidate is evaluated by a direct linear solve.
 */
inline WorstBestResult worst_best_case(const Mdp& mdp, const Policy& policy, double alpha,
                                       const WorstBestOptions& options = {}) {
    detail::check_level(alpha, "worst_best_case");
    check_policy(mdp, policy);
    const DoubleQ fixed = detail::tight_spe(mdp, policy, alpha);
    detail::require_alpha_coherent(mdp, policy, fixed, options.coherence_tol, "worst_best_case");
    const auto perms = enumerate_constrained_permutations(mdp.n_states(), options.state_cap);

    const std::size_t n_x = mdp.n_states();
    const std::size_t n = 2 * n_x;
    const double gamma = mdp.gamma();

    struct Pair {
        StateId x;
        ActionId a;
        double weight;
        std::vector<KernelRows> choices;
    };
    std::vector<Pair> pairs;
    double log_count = 0.0;
    for (StateId x = 0; x < n_x; ++x) {
        for (ActionId a : policy.support(x)) {
            Pair pair{x, a, policy(x, a), {}};
            for (const auto& sigma : perms) {
                KernelRows rows = permutation_rows(mdp, alpha, x, a, sigma);
                if (std::find(pair.choices.begin(), pair.choices.end(), rows) == pair.choices.end()) {
                    pair.choices.push_back(std::move(rows));
                }
            }
            log_count += std::log(static_cast<double>(pair.choices.size()));
            pairs.push_back(std::move(pair));
        }
    }
    if (log_count > std::log(static_cast<double>(options.candidate_cap))) {
        throw ResourceError("worst_best_case: candidate kernels exceed the cap of " +
                            std::to_string(options.candidate_cap));
    }

    std::vector<std::size_t> digit(pairs.size(), 0);
    auto evaluate = [&]() {
        // V = r_pi + gamma P_pi V over augmented states.
        std::vector<double> a(n * n, 0.0), b(n, 0.0);
        for (std::size_t s = 0; s < n; ++s) a[s * n + s] = 1.0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const Pair& pair = pairs[i];
            const KernelRows& rows = pair.choices[digit[i]];
            for (int mode = 0; mode < 2; ++mode) {
                const std::size_t s = mode == 0 ? worst_substate(pair.x) : best_substate(pair.x);
                const auto& row = mode == 0 ? rows.worst : rows.best;
                for (std::size_t t = 0; t < n; ++t) {
                    if (row[t] == 0.0) continue;
                    const double w = pair.weight * row[t];
                    a[s * n + t] -= gamma * w;
                    b[s] += w * mdp.r(pair.x, pair.a, original_state(t));
                }
            }
        }
        return solve_linear_system(std::move(a), std::move(b));
    };
    auto advance = [&]() {
        for (std::size_t i = pairs.size(); i-- > 0;) {
            if (++digit[i] < pairs[i].choices.size()) return true;
            digit[i] = 0;
        }
        return false;
    };

    WorstBestResult out;
    out.v_worst.assign(n_x, std::numeric_limits<double>::infinity());
    out.v_best.assign(n_x, -std::numeric_limits<double>::infinity());
    do {
        const auto v = evaluate();
        for (StateId x = 0; x < n_x; ++x) {
            out.v_worst[x] = std::min(out.v_worst[x], v[worst_substate(x)]);
            out.v_best[x] = std::max(out.v_best[x], v[best_substate(x)]);
        }
        ++out.candidates;
    } while (advance());

    std::size_t attaining = 0;
    std::fill(digit.begin(), digit.end(), 0);
    do {
        const auto v = evaluate();
        bool all = true;
        for (StateId x = 0; x < n_x && all; ++x) {
            const double scale = std::max({1.0, std::abs(out.v_worst[x]), std::abs(out.v_best[x])});
            all = v[worst_substate(x)] <= out.v_worst[x] + options.attain_tol * scale &&
                  v[best_substate(x)] >= out.v_best[x] - options.attain_tol * scale;
        }
        if (!all) continue;
        if (++attaining == 1) {
            std::vector<double> probs = AugmentedKernel::risk_neutral(mdp, alpha).probs();
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const KernelRows& rows = pairs[i].choices[digit[i]];
                std::copy(rows.worst.begin(), rows.worst.end(),
                          probs.begin() + (worst_substate(pairs[i].x) * mdp.n_actions() + pairs[i].a) * n);
                std::copy(rows.best.begin(), rows.best.end(),
                          probs.begin() + (best_substate(pairs[i].x) * mdp.n_actions() + pairs[i].a) * n);
            }
            out.kernel.emplace(n_x, mdp.n_actions(), std::move(probs));
        }
    } while (advance());
    out.common_kernel = attaining > 0;
    out.tied = attaining > 1;

    std::tie(out.spe_v1, out.spe_v2) = bavar_state_values(policy, fixed);
    for (StateId x = 0; x < n_x; ++x) {
        out.max_deviation = std::max({out.max_deviation, std::abs(out.v_worst[x] - out.spe_v1[x]),
                                      std::abs(out.v_best[x] - out.spe_v2[x])});
    }
    return out;
}

struct BavarGapEntry {
    StateId x = 0;
    ActionId a = 0;
    double v1 = 0.0;
    double v2 = 0.0;
    double left_lower = 0.0;
    double left_upper = 0.0;
    double right_lower = 0.0;
    double right_upper = 0.0;
    /// V1 + tail - AVaR_left and AVaR_right + tail - V2, from the certifying side of each bracket.
    double left_gap = 0.0;
    double right_gap = 0.0;
    bool holds = false;
};

struct BavarGapReport {
    std::vector<BavarGapEntry> entries;
    double tail_bound = 0.0;
    std::size_t budget = 0;
    bool exact = true;
    bool holds = true;
    /// The brackets were too wide to decide at the largest budget.
    bool inconclusive = false;
};

struct BavarGapOptions {
    std::size_t k = 30;
    std::size_t initial_budget = 4096;
    std::size_t max_budget = std::size_t{1} << 18;
    double slack = 1e-9;
    double coherence_tol = 1e-8;
    /// Per-half atom cap of the exact fallback used when brackets cannot decide.
    std::size_t exact_atom_cap = std::size_t{1} << 22;
    FissionOptions fission{};
};

/**
 * Compares (V1, V2) with the AVaRs of the k-step return law at every supported
 * (x, a). The return AVaRs come as brackets; when they cannot decide, the
 * exact split-horizon computation is tried, then the budget keeps growing.
 */
inline BavarGapReport bavar_vs_avar_gap(const Mdp& mdp, const Policy& policy, double alpha,
                                        const BavarGapOptions& options = {}) {
    detail::check_level(alpha, "bavar_vs_avar_gap");
    check_policy(mdp, policy);
    const DoubleQ fixed = detail::tight_spe(mdp, policy, alpha);
    detail::require_alpha_coherent(mdp, policy, fixed, options.coherence_tol, "bavar_vs_avar_gap");
    const auto [v1, v2] = bavar_state_values(policy, fixed);

    auto assess = [&](const ReturnAvars& avars, std::size_t budget, bool& refuted) {
        BavarGapReport report;
        report.tail_bound = avars.tail_bound;
        report.budget = budget;
        report.exact = avars.exact;
        refuted = false;
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            for (ActionId a : policy.support(x)) {
                BavarGapEntry e;
                e.x = x;
                e.a = a;
                e.v1 = v1[x];
                e.v2 = v2[x];
                e.left_lower = avars.left_lower(x, a);
                e.left_upper = avars.left_upper(x, a);
                e.right_lower = avars.right_lower(x, a);
                e.right_upper = avars.right_upper(x, a);
                const double margin =
                    avars.tail_bound + options.slack * std::max({1.0, std::abs(e.v1), std::abs(e.v2)});
                e.left_gap = e.v1 + avars.tail_bound - e.left_upper;
                e.right_gap = e.right_lower + avars.tail_bound - e.v2;
                e.holds = e.left_upper <= e.v1 + margin && e.v2 <= e.right_lower + margin;
                refuted = refuted || e.left_lower > e.v1 + margin || e.v2 > e.right_upper + margin;
                report.holds = report.holds && e.holds;
                report.entries.push_back(e);
            }
        }
        return report;
    };

    bool tried_exact = false;
    for (std::size_t budget = options.initial_budget;; budget *= 4) {
        bool refuted = false;
        BavarGapReport report =
            assess(return_avars(mdp, policy, alpha, options.k, {budget, options.fission}), budget, refuted);
        if (report.holds || refuted || report.exact) return report;
        if (!tried_exact) {
            // Tight cases need more precision than any coarsening budget gives.
            tried_exact = true;
            if (auto exact = exact_return_avars(mdp, policy, alpha, options.k, options.exact_atom_cap)) {
                return assess(*exact, 0, refuted);
            }
        }
        if (budget >= options.max_budget) {
            report.inconclusive = true;
            return report;
        }
    }
}

/// Largest violation of each axiom (translation, sub-additivity, homogeneity, monotonicity).
struct AxiomViolations {
    std::array<double, 4> max_violation{0.0, 0.0, 0.0, 0.0};
};

struct CoherenceReport {
    /// rho(r) = (1 - gamma) V2(x; r), checked against the negated reward.
    AxiomViolations right;
    /// rho(r) = -(1 - gamma) V1(x; r).
    AxiomViolations left;
    std::size_t trials = 0;
    bool passed = true;
    std::vector<std::string> failures;
};

inline constexpr std::array<const char*, 4> kAxiomNames{"translation invariance", "sub-additivity",
                                                         "positive homogeneity", "monotonicity"};

/**
 * Random-reward check of the four coherence axioms for (1 - gamma) V2(x) and
 * -(1 - gamma) V1(x), recomputing SPE for every perturbed reward table.
 */
inline CoherenceReport coherence_axioms_check(const Mdp& mdp, const Policy& policy, double alpha, StateId x,
                                              std::size_t n_trials, std::uint64_t seed, double tol = 1e-8) {
    detail::check_level(alpha, "coherence_axioms_check");
    check_policy(mdp, policy);
    if (x >= mdp.n_states()) throw StructuralError("coherence_axioms_check: state out of range");
    detail::require_alpha_coherent(mdp, policy, detail::tight_spe(mdp, policy, alpha), 1e-8,
                                   "coherence_axioms_check");

    const double scale = 1.0 - mdp.gamma();
    // (rho_right, rho_left) for a reward table.
    auto rho = [&](const std::vector<double>& reward) {
        const Mdp perturbed = mdp.with_rewards(reward);
        const DoubleQ fixed = detail::tight_spe(perturbed, policy, alpha);
        detail::require_alpha_coherent(perturbed, policy, fixed, 1e-8, "coherence_axioms_check (perturbed)");
        const auto [v1, v2] = bavar_state_values(policy, fixed);
        return std::pair{scale * v2[x], -scale * v1[x]};
    };

    std::mt19937_64 rng(seed);
    const double spread = std::max(1.0, mdp.max_abs_reward());
    std::uniform_real_distribution<double> entry(-2.0 * spread, 2.0 * spread);
    std::uniform_real_distribution<double> shift(-3.0 * spread, 3.0 * spread);
    std::uniform_real_distribution<double> factor(0.0, 3.0);
    std::uniform_real_distribution<double> bump(0.0, spread);
    const std::size_t size = mdp.rewards().size();
    auto draw = [&]() {
        std::vector<double> r(size);
        for (double& v : r) v = entry(rng);
        return r;
    };
    auto map = [](std::vector<double> r, auto f) {
        for (double& v : r) v = f(v);
        return r;
    };

    CoherenceReport report;
    auto record = [&](AxiomViolations& side, std::size_t axiom, double violation, const char* who) {
        side.max_violation[axiom] = std::max(side.max_violation[axiom], violation);
        if (violation > tol) {
            report.passed = false;
            report.failures.push_back(std::string(who) + ": " + kAxiomNames[axiom] + " violated by " +
                                      std::to_string(violation) + " in trial " + std::to_string(report.trials));
        }
    };

    for (std::size_t trial = 0; trial < n_trials; ++trial) {
        const auto r1 = draw();
        const auto r2 = draw();
        const double beta = shift(rng);
        const double lambda = factor(rng);
        const auto [right1, left1] = rho(r1);
        const auto [right2, left2] = rho(r2);

        // Translation: a constant loss beta lowers the right measure by beta,
        // a constant gain beta lowers the left measure by beta.
        [[maybe_unused]] const auto [right_t, ignored_t] = rho(map(r1, [&](double v) { return v - beta; }));
        [[maybe_unused]] const auto [ignored_u, left_t] = rho(map(r1, [&](double v) { return v + beta; }));
        record(report.right, 0, std::abs(right_t - (right1 - beta)), "(1-gamma)V2");
        record(report.left, 0, std::abs(left_t - (left1 - beta)), "-(1-gamma)V1");

        std::vector<double> sum(size);
        for (std::size_t i = 0; i < size; ++i) sum[i] = r1[i] + r2[i];
        const auto [right_s, left_s] = rho(sum);
        record(report.right, 1, right_s - (right1 + right2), "(1-gamma)V2");
        record(report.left, 1, left_s - (left1 + left2), "-(1-gamma)V1");

        const auto [right_h, left_h] = rho(map(r1, [&](double v) { return lambda * v; }));
        record(report.right, 2, std::abs(right_h - lambda * right1), "(1-gamma)V2");
        record(report.left, 2, std::abs(left_h - lambda * left1), "-(1-gamma)V1");

        // Monotonicity with r_hi >= r1: more reward raises V2 and lowers -V1.
        const auto r_hi = map(r1, [&](double v) { return v + bump(rng); });
        const auto [right_m, left_m] = rho(r_hi);
        record(report.right, 3, right1 - right_m, "(1-gamma)V2");
        record(report.left, 3, left_m - left1, "-(1-gamma)V1");
        ++report.trials;
    }
    return report;
}

} // namespace diatomic
