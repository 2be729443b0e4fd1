#pragma once

#include "diatomic/discrete_dist.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/parallel.hpp"
#include "diatomic/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace diatomic {

/// Return distribution per (x, a).
using DistFunction = StateActionTable<DiscreteDist>;

inline DistFunction constant_dist_function(const Mdp& mdp, const DiscreteDist& d) {
    return DistFunction(mdp.n_states(), mdp.n_actions(), d);
}

inline std::size_t total_atoms(const DistFunction& mu) {
    std::size_t out = 0;
    for (const auto& d : mu) out += d.size();
    return out;
}

/// max over (x, a) of W_p between the two entries.
inline double max_wasserstein(const DistFunction& lhs, const DistFunction& rhs, double p) {
    require_same_shape(lhs, rhs, "max_wasserstein");
    double out = 0.0;
    auto it = rhs.begin();
    for (const auto& d : lhs) out = std::max(out, wasserstein(d, *it++, p));
    return out;
}

struct FissionOptions {
    /// Atoms lighter than this are dropped after each step (0 keeps the exact law).
    double prune_eps = 0.0;
    /// Budget on the total number of atoms produced by one operator application.
    std::size_t atom_cap = 2'000'000;
    std::size_t threads = 1;
};

/**
 * Distributional Bellman operator on atomic distribution functions.
 *
 * Entry (x, a) of the result is the mixture over (x', a') with weights
 * P(x'|x,a) pi(a'|x') of mu(x', a') pushed through z -> r(x,a,x') + gamma z.
 * Throws ResourceError before allocating when the produced atom count would
 * exceed options.atom_cap.
 */
inline DistFunction dbo_apply(const Mdp& mdp, const Policy& policy, const DistFunction& mu,
                              const FissionOptions& options = {}) {
    check_policy(mdp, policy);
    if (mu.n_states() != mdp.n_states() || mu.n_actions() != mdp.n_actions()) {
        throw StructuralError("dbo_apply: distribution function shape does not match the MDP");
    }
    const std::size_t n_x = mdp.n_states();
    const std::size_t n_a = mdp.n_actions();

    std::vector<std::size_t> next_size(n_x, 0);
    for (StateId y = 0; y < n_x; ++y) {
        for (ActionId b = 0; b < n_a; ++b) {
            if (policy(y, b) > 0.0) next_size[y] += mu(y, b).size();
        }
    }
    std::size_t produced = 0;
    for (StateId x = 0; x < n_x; ++x) {
        for (ActionId a = 0; a < n_a; ++a) {
            for (StateId y = 0; y < n_x; ++y) {
                if (mdp.p(x, a, y) > 0.0) produced += next_size[y];
            }
        }
    }
    if (produced > options.atom_cap) {
        throw ResourceError("dbo_apply: " + std::to_string(produced) + " atoms exceed the budget of " +
                            std::to_string(options.atom_cap) + "; use prune_eps > 0 or fewer steps");
    }

    DistFunction out(n_x, n_a);
    const double gamma = mdp.gamma();
    parallel_for(n_x * n_a, options.threads, [&](std::size_t idx) {
        const StateId x = idx / n_a;
        const ActionId a = idx % n_a;
        std::vector<Atom> atoms;
        for (StateId y = 0; y < n_x; ++y) {
            const double p = mdp.p(x, a, y);
            if (p == 0.0) continue;
            const double reward = mdp.r(x, a, y);
            for (ActionId b = 0; b < n_a; ++b) {
                const double weight = p * policy(y, b);
                if (weight == 0.0) continue;
                for (const Atom& atom : mu(y, b).atoms()) {
                    atoms.push_back({reward + gamma * atom.value, weight * atom.prob});
                }
            }
        }
        out(x, a) = DiscreteDist::from_unchecked(std::move(atoms));
    });
    return out;
}

/// Drops atoms with probability below eps and renormalizes; the heaviest atom always survives.
inline DiscreteDist prune(const DiscreteDist& d, double eps) {
    if (eps <= 0.0) return d;
    std::vector<Atom> kept;
    for (const Atom& atom : d.atoms()) {
        if (atom.prob >= eps) kept.push_back(atom);
    }
    if (kept.empty()) {
        kept.push_back(*std::max_element(d.atoms().begin(), d.atoms().end(),
                                         [](const Atom& l, const Atom& r) { return l.prob < r.prob; }));
    }
    return DiscreteDist::from_unchecked(std::move(kept), true);
}

/// k applications of dbo_apply; observe(step, mu_step) sees every iterate.
template <class Observe>
DistFunction dbo_iterate(const Mdp& mdp, const Policy& policy, DistFunction mu, std::size_t k,
                         const FissionOptions& options, Observe&& observe) {
    if (!(options.prune_eps >= 0.0)) throw DomainError("dbo_iterate: prune_eps must be >= 0");
    for (std::size_t step = 1; step <= k; ++step) {
        mu = dbo_apply(mdp, policy, mu, options);
        if (options.prune_eps > 0.0) {
            for (auto& d : mu) d = prune(d, options.prune_eps);
        }
        observe(step, mu);
    }
    return mu;
}

inline DistFunction dbo_iterate(const Mdp& mdp, const Policy& policy, DistFunction mu, std::size_t k,
                                const FissionOptions& options = {}) {
    return dbo_iterate(mdp, policy, std::move(mu), k, options, [](std::size_t, const DistFunction&) {});
}

enum class Rounding { upward, downward };

/**
 * Merges runs of neighbouring atoms spanning at most (max - min) / budget into
 * one atom placed at the run's largest (upward) or smallest (downward) value.
 * Upward merging yields a law that stochastically dominates d; downward merging
 * one dominated by d. Returns d unchanged when it already fits the budget.
 */
inline DiscreteDist coarsen(const DiscreteDist& d, std::size_t budget, Rounding rounding) {
    if (budget == 0) throw DomainError("coarsen: budget must be positive");
    if (d.size() <= budget) return d;
    const double width = (d.max_value() - d.min_value()) / static_cast<double>(budget);
    std::vector<Atom> out;
    const auto& atoms = d.atoms();
    std::size_t start = 0;
    while (start < atoms.size()) {
        std::size_t stop = start;
        double mass = 0.0;
        while (stop < atoms.size() && atoms[stop].value - atoms[start].value <= width) {
            mass += atoms[stop].prob;
            ++stop;
        }
        const double value = rounding == Rounding::upward ? atoms[stop - 1].value : atoms[start].value;
        out.push_back({value, mass});
        start = stop;
    }
    return DiscreteDist::from_unchecked(std::move(out), true);
}

/**
 * Brackets of the left/right AVaRs of the k-step law (T^pi)^k delta_0.
 *
 * Exact fission is kept while every entry fits `budget` atoms; beyond that two
 * runs merge atoms upward and downward so that [lower, upper] encloses the
 * AVaRs of the exact k-step law. `tail_bound` = gamma^k max|r| / (1 - gamma)
 * bounds the distance from the k-step law to the true return law in W_inf.
 */
struct ReturnAvars {
    QTable left_lower;
    QTable left_upper;
    QTable right_lower;
    QTable right_upper;
    double tail_bound = 0.0;
    bool exact = true;
    std::size_t budget = 0;

    QTable left() const { return midpoint(left_lower, left_upper); }
    QTable right() const { return midpoint(right_lower, right_upper); }

private:
    static QTable midpoint(const QTable& lo, const QTable& hi) {
        QTable out = lo;
        auto it = hi.begin();
        for (double& v : out) v = 0.5 * (v + *it++);
        return out;
    }
};

struct ReturnAvarOptions {
    std::size_t budget = 4096;
    FissionOptions fission{};
};

inline double fission_tail_bound(const Mdp& mdp, std::size_t k) {
    return std::pow(mdp.gamma(), static_cast<double>(k)) * mdp.max_abs_reward() / (1.0 - mdp.gamma());
}

inline ReturnAvars return_avars(const Mdp& mdp, const Policy& policy, double alpha, std::size_t k,
                                const ReturnAvarOptions& options = {}) {
    detail::check_level(alpha, "return_avars");
    ReturnAvars out;
    out.tail_bound = fission_tail_bound(mdp, k);
    out.budget = options.budget;

    auto run = [&](Rounding rounding, QTable& left, QTable& right) {
        DistFunction mu = constant_dist_function(mdp, DiscreteDist::dirac(0.0));
        for (std::size_t step = 0; step < k; ++step) {
            mu = dbo_apply(mdp, policy, mu, options.fission);
            for (auto& d : mu) {
                if (d.size() > options.budget) {
                    d = coarsen(d, options.budget, rounding);
                    out.exact = false;
                }
            }
        }
        left = QTable(mdp.n_states(), mdp.n_actions());
        right = QTable(mdp.n_states(), mdp.n_actions());
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            for (ActionId a = 0; a < mdp.n_actions(); ++a) {
                left(x, a) = avar_left(mu(x, a), alpha);
                right(x, a) = avar_right(mu(x, a), 1.0 - alpha);
            }
        }
    };
    run(Rounding::upward, out.left_upper, out.right_upper);
    if (out.exact) {
        out.left_lower = out.left_upper;
        out.right_lower = out.right_upper;
    } else {
        run(Rounding::downward, out.left_lower, out.right_lower);
    }
    return out;
}

namespace detail {

/// Sorts by value and merges values within kAtomMergeTolerance, keeping total mass (no renormalization).
inline void merge_sub_law(std::vector<Atom>& atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.value < r.value; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (out > 0 && atoms[i].value - atoms[out - 1].value <= kAtomMergeTolerance) {
            atoms[out - 1].prob += atoms[i].prob;
        } else {
            atoms[out++] = atoms[i];
        }
    }
    atoms.resize(out);
}

/// One block of Z = A + c B with A a sub-law over sorted values and B a law over sorted values.
struct ConvolutionBlock {
    std::vector<Atom> a;
    std::vector<double> b_values;
    std::vector<double> b_mass;   // prefix sums of probabilities, size n_b + 1
    std::vector<double> b_moment; // prefix sums of prob * value, size n_b + 1
};

/// P(Z <= t) and E[(t - Z)^+] summed over blocks, with Z = A + c B.
inline std::pair<double, double> convolution_cdf_and_shortfall(const std::vector<ConvolutionBlock>& blocks,
                                                               double c, double t) {
    double cdf = 0.0;
    double shortfall = 0.0;
    for (const auto& block : blocks) {
        std::size_t j = block.b_values.size();
        for (const Atom& atom : block.a) {
            const double room = t - atom.value;
            while (j > 0 && c * block.b_values[j - 1] > room) --j;
            if (j == 0) break;
            cdf += atom.prob * block.b_mass[j];
            shortfall += atom.prob * (room * block.b_mass[j] - c * block.b_moment[j]);
        }
    }
    return {cdf, shortfall};
}

} // namespace detail

/**
 * Exact left/right AVaRs of the k-step law by splitting the horizon in two:
 * the first m rewards are tracked per end state, the remaining k - m steps come
 * from dbo_iterate, and the AVaR of their (conditionally independent) sum is
 * found as max_t { t - E[(t - Z)^+] / alpha } without forming the product law.
 * Returns nothing when either half would hold more than `atom_cap` atoms.
 */
inline std::optional<ReturnAvars> exact_return_avars(const Mdp& mdp, const Policy& policy, double alpha,
                                                     std::size_t k, std::size_t atom_cap = 1u << 22) {
    detail::check_level(alpha, "exact_return_avars");
    check_policy(mdp, policy);
    if (k == 0) return std::nullopt;
    const std::size_t n_x = mdp.n_states();
    const std::size_t m = (k + 1) / 2;
    const double gamma = mdp.gamma();
    const double c = std::pow(gamma, static_cast<double>(m));

    // Backward half: law of the (k - m)-step return from a state.
    std::vector<DiscreteDist> tail(n_x, DiscreteDist::dirac(0.0));
    if (k > m) {
        DistFunction mu = constant_dist_function(mdp, DiscreteDist::dirac(0.0));
        try {
            mu = dbo_iterate(mdp, policy, std::move(mu), k - m, {0.0, atom_cap, 1});
        } catch (const ResourceError&) {
            return std::nullopt;
        }
        for (StateId y = 0; y < n_x; ++y) {
            std::vector<std::pair<double, DiscreteDist>> parts;
            for (ActionId a : policy.support(y)) parts.emplace_back(policy(y, a), mu(y, a));
            tail[y] = mix(parts);
        }
    }
    std::vector<detail::ConvolutionBlock> blocks_template(n_x);
    std::vector<double> tail_mean(n_x);
    for (StateId y = 0; y < n_x; ++y) {
        auto& block = blocks_template[y];
        block.b_mass.push_back(0.0);
        block.b_moment.push_back(0.0);
        for (const Atom& atom : tail[y].atoms()) {
            block.b_values.push_back(atom.value);
            block.b_mass.push_back(block.b_mass.back() + atom.prob);
            block.b_moment.push_back(block.b_moment.back() + atom.prob * atom.value);
        }
        tail_mean[y] = expectation(tail[y]);
    }

    ReturnAvars out;
    out.tail_bound = fission_tail_bound(mdp, k);
    out.exact = true;
    out.left_lower = QTable(n_x, mdp.n_actions());
    out.right_lower = QTable(n_x, mdp.n_actions());
    for (StateId x = 0; x < n_x; ++x) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            // Forward half: sub-law of the first m rewards, split by the state reached.
            std::vector<std::vector<Atom>> head(n_x);
            for (StateId y = 0; y < n_x; ++y) {
                if (mdp.p(x, a, y) > 0.0) head[y].push_back({mdp.r(x, a, y), mdp.p(x, a, y)});
            }
            double discount = gamma;
            for (std::size_t step = 1; step < m; ++step) {
                std::vector<std::vector<Atom>> next(n_x);
                std::size_t count = 0;
                for (StateId y = 0; y < n_x; ++y) {
                    for (const Atom& atom : head[y]) {
                        for (ActionId b : policy.support(y)) {
                            for (StateId z = 0; z < n_x; ++z) {
                                const double p = mdp.p(y, b, z);
                                if (p == 0.0) continue;
                                next[z].push_back({atom.value + discount * mdp.r(y, b, z), atom.prob * policy(y, b) * p});
                                if (++count > atom_cap) return std::nullopt;
                            }
                        }
                    }
                }
                for (auto& atoms : next) detail::merge_sub_law(atoms);
                head = std::move(next);
                discount *= gamma;
            }
            std::vector<detail::ConvolutionBlock> blocks = blocks_template;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            double mean = 0.0;
            for (StateId y = 0; y < n_x; ++y) {
                blocks[y].a = std::move(head[y]);
                if (blocks[y].a.empty()) continue;
                lo = std::min(lo, blocks[y].a.front().value + c * tail[y].min_value());
                hi = std::max(hi, blocks[y].a.back().value + c * tail[y].max_value());
                for (const Atom& atom : blocks[y].a) mean += atom.prob * (atom.value + c * tail_mean[y]);
            }
            // Smallest t with P(Z <= t) >= alpha, by bisection on [lo, hi].
            double below = lo;
            double above = hi;
            if (detail::convolution_cdf_and_shortfall(blocks, c, lo).first >= alpha) above = lo;
            for (int it = 0; it < 200 && above > below; ++it) {
                const double mid = below + 0.5 * (above - below);
                if (mid <= below || mid >= above) break;
                if (detail::convolution_cdf_and_shortfall(blocks, c, mid).first >= alpha) {
                    above = mid;
                } else {
                    below = mid;
                }
            }
            // t - E[(t - Z)^+] / alpha is concave with its maximum at the alpha-quantile.
            double left = -std::numeric_limits<double>::infinity();
            for (double t : {below, above}) {
                left = std::max(left, t - detail::convolution_cdf_and_shortfall(blocks, c, t).second / alpha);
            }
            out.left_lower(x, a) = left;
            out.right_lower(x, a) = (mean - alpha * left) / (1.0 - alpha);
        }
    }
    out.left_upper = out.left_lower;
    out.right_upper = out.right_lower;
    return out;
}

} // namespace diatomic
