#pragma once

#include "diatomic/discrete_dist.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/table.hpp"

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace diatomic {

using Rng = std::mt19937_64;

struct RandomMdpOptions {
    double gamma_min = 0.3;
    double gamma_max = 0.9;
    double reward_scale = 1.0;
    /// Chance that a transition entry is forced to zero (one entry per row always survives).
    double sparsity = 0.3;
};

namespace detail {

inline std::vector<double> random_transitions(Rng& rng, std::size_t n_x, std::size_t n_a, double sparsity) {
    std::exponential_distribution<double> weight(1.0);
    std::bernoulli_distribution drop(sparsity);
    std::uniform_int_distribution<std::size_t> pick(0, n_x - 1);
    std::vector<double> p(n_x * n_a * n_x, 0.0);
    for (std::size_t row = 0; row < n_x * n_a; ++row) {
        double total = 0.0;
        const std::size_t keep = pick(rng);
        for (std::size_t y = 0; y < n_x; ++y) {
            double w = weight(rng);
            if (y != keep && drop(rng)) w = 0.0;
            p[row * n_x + y] = w;
            total += w;
        }
        for (std::size_t y = 0; y < n_x; ++y) p[row * n_x + y] /= total;
    }
    return p;
}

} // namespace detail

inline double random_gamma(Rng& rng, const RandomMdpOptions& options = {}) {
    return std::uniform_real_distribution<double>(options.gamma_min, options.gamma_max)(rng);
}

inline Mdp random_mdp(Rng& rng, std::size_t n_states, std::size_t n_actions, const RandomMdpOptions& options = {}) {
    std::uniform_real_distribution<double> reward(-options.reward_scale, options.reward_scale);
    auto p = detail::random_transitions(rng, n_states, n_actions, options.sparsity);
    std::vector<double> r(p.size());
    for (double& v : r) v = reward(rng);
    return Mdp(n_states, n_actions, std::move(p), std::move(r), random_gamma(rng, options));
}

/**
 * Random MDP in which every action is optimal: draws P, a target V* and raw
 * rewards, then shifts r(x, a, .) so that sum_x' P(r + gamma V*) = V*(x).
 */
inline Mdp random_balanced_mdp(Rng& rng, std::size_t n_states, std::size_t n_actions,
                               const RandomMdpOptions& options = {}) {
    std::uniform_real_distribution<double> unit(-options.reward_scale, options.reward_scale);
    auto p = detail::random_transitions(rng, n_states, n_actions, options.sparsity);
    const double gamma = random_gamma(rng, options);
    std::vector<double> v(n_states);
    for (double& x : v) x = 3.0 * unit(rng);
    std::vector<double> r(p.size());
    for (double& x : r) x = unit(rng);
    for (StateId x = 0; x < n_states; ++x) {
        for (ActionId a = 0; a < n_actions; ++a) {
            const std::size_t row = (x * n_actions + a) * n_states;
            double mean = 0.0;
            for (StateId y = 0; y < n_states; ++y) mean += p[row + y] * (r[row + y] + gamma * v[y]);
            for (StateId y = 0; y < n_states; ++y) r[row + y] += v[x] - mean;
        }
    }
    return Mdp(n_states, n_actions, std::move(p), std::move(r), gamma);
}

inline Policy random_deterministic_policy(Rng& rng, const Mdp& mdp) {
    std::vector<ActionId> choice(mdp.n_states());
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        const auto& offered = mdp.actions(x);
        choice[x] = offered[std::uniform_int_distribution<std::size_t>(0, offered.size() - 1)(rng)];
    }
    return Policy::deterministic(mdp, choice);
}

inline QTable random_qtable(Rng& rng, const Mdp& mdp, double lo, double hi) {
    std::uniform_real_distribution<double> value(lo, hi);
    QTable q(mdp.n_states(), mdp.n_actions());
    for (double& v : q) v = value(rng);
    return q;
}

/// Random law with up to max_atoms atoms; half the draws use integer values so ties occur.
inline DiscreteDist random_dist(Rng& rng, std::size_t max_atoms, double scale = 10.0) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_atoms)(rng);
    const bool integral = std::bernoulli_distribution(0.5)(rng);
    std::uniform_real_distribution<double> value(-scale, scale);
    std::exponential_distribution<double> weight(1.0);
    std::vector<Atom> atoms(n);
    double total = 0.0;
    for (Atom& atom : atoms) {
        atom.value = integral ? std::round(value(rng)) : value(rng);
        atom.prob = weight(rng);
        total += atom.prob;
    }
    for (Atom& atom : atoms) atom.prob /= total;
    return DiscreteDist(std::move(atoms));
}

inline double random_level(Rng& rng) { return std::uniform_real_distribution<double>(0.05, 0.95)(rng); }

} // namespace diatomic
