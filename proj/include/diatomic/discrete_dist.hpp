#pragma once

#include "diatomic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace diatomic {

/// Atoms whose values differ by at most this much are merged.
inline constexpr double kAtomMergeTolerance = 1e-12;
/// Weight sums accepted by the constructor and by mix().
inline constexpr double kWeightSumTolerance = 1e-9;
/// Quantile cells shorter than this are ignored by the sup-type distance.
inline constexpr double kQuantileCellTolerance = 1e-14;

struct Atom {
    double value = 0.0;
    double prob = 0.0;

    bool operator==(const Atom&) const = default;
};

namespace detail {

/// Sort by value, merge near-equal values (at their probability-weighted mean),
/// drop zero-probability atoms and rescale the total mass to exactly 1.
inline std::vector<Atom> canonicalize(std::vector<Atom> atoms, bool already_sorted = false) {
    if (!already_sorted) {
        std::stable_sort(atoms.begin(), atoms.end(),
                         [](const Atom& lhs, const Atom& rhs) { return lhs.value < rhs.value; });
    }
    std::vector<Atom> out;
    out.reserve(atoms.size());
    double total = 0.0;
    for (const Atom& atom : atoms) {
        if (atom.prob == 0.0) continue;
        total += atom.prob;
        if (!out.empty() && atom.value - out.back().value <= kAtomMergeTolerance) {
            Atom& last = out.back();
            const double mass = last.prob + atom.prob;
            last.value = (last.value * last.prob + atom.value * atom.prob) / mass;
            last.prob = mass;
        } else {
            out.push_back(atom);
        }
    }
    for (Atom& atom : out) atom.prob /= total;
    return out;
}

inline void check_level(double alpha, const char* what) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError(std::string(what) + ": level must lie in (0, 1), got " + std::to_string(alpha));
    }
}

} // namespace detail

/**
 * Finitely supported probability distribution on the real line.
 *
 * Atoms are kept sorted by value with distinct values and positive
 * probabilities summing to one.
 */
class DiscreteDist {
public:
    DiscreteDist() : atoms_{{0.0, 1.0}} {}

    explicit DiscreteDist(std::vector<Atom> atoms) {
        if (atoms.empty()) throw DomainError("DiscreteDist: at least one atom required");
        double total = 0.0;
        for (const Atom& atom : atoms) {
            if (!(atom.prob >= 0.0) || !std::isfinite(atom.value) || !std::isfinite(atom.prob)) {
                throw DomainError("DiscreteDist: atoms need finite values and non-negative probabilities");
            }
            total += atom.prob;
        }
        if (std::abs(total - 1.0) > kWeightSumTolerance) {
            throw DomainError("DiscreteDist: probabilities sum to " + std::to_string(total));
        }
        atoms_ = detail::canonicalize(std::move(atoms));
    }

    static DiscreteDist dirac(double value) { return DiscreteDist({{value, 1.0}}); }

    /// Builds from atoms whose total mass is known to be 1 up to rounding.
    static DiscreteDist from_unchecked(std::vector<Atom> atoms, bool sorted = false) {
        DiscreteDist out;
        out.atoms_ = detail::canonicalize(std::move(atoms), sorted);
        return out;
    }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    double min_value() const noexcept { return atoms_.front().value; }
    double max_value() const noexcept { return atoms_.back().value; }

    bool operator==(const DiscreteDist&) const = default;

private:
    std::vector<Atom> atoms_;
};

/// Two-atom distribution alpha * delta(theta1) + (1 - alpha) * delta(theta2).
class Diatomic {
public:
    Diatomic(double theta1, double theta2, double alpha)
        : theta1_(theta1), theta2_(theta2), alpha_(alpha) {
        detail::check_level(alpha, "Diatomic");
        if (theta1 > theta2 + kAtomMergeTolerance) {
            throw DomainError("Diatomic: theta1 must not exceed theta2");
        }
    }

    double theta1() const noexcept { return theta1_; }
    double theta2() const noexcept { return theta2_; }
    double alpha() const noexcept { return alpha_; }

    DiscreteDist to_dist() const {
        return DiscreteDist({{theta1_, alpha_}, {theta2_, 1.0 - alpha_}});
    }

private:
    double theta1_;
    double theta2_;
    double alpha_;
};

// Closed-form AVaR on value-sorted particles. Probabilities need not be
// normalized to exactly 1 and equal values may repeat.

/// (1/alpha) sum_j max(0, min(p_j, alpha - P_{j-1})) v_j.
inline double left_avar_sorted(std::span<const Atom> sorted, double alpha) {
    double below = 0.0;
    double acc = 0.0;
    for (const Atom& atom : sorted) {
        const double room = alpha - below;
        if (room <= 0.0) break;
        acc += std::min(atom.prob, room) * atom.value;
        below += atom.prob;
    }
    return acc / alpha;
}

/// (1/(1-alpha)) sum_j max(0, min(p_j, P_j - alpha)) v_j, alpha being the left level.
inline double right_avar_sorted(std::span<const Atom> sorted, double alpha) {
    double upto = 0.0;
    double acc = 0.0;
    for (const Atom& atom : sorted) {
        upto += atom.prob;
        const double take = std::max(0.0, std::min(atom.prob, upto - alpha));
        acc += take * atom.value;
    }
    return acc / (1.0 - alpha);
}

/// Generalized inverse CDF: the smallest atom value whose cumulative mass reaches tau.
inline double quantile(const DiscreteDist& d, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw DomainError("quantile: tau must lie in (0, 1], got " + std::to_string(tau));
    }
    double cum = 0.0;
    for (const Atom& atom : d.atoms()) {
        cum += atom.prob;
        if (cum >= tau) return atom.value;
    }
    return d.max_value();
}

inline double expectation(const DiscreteDist& d) {
    double acc = 0.0;
    for (const Atom& atom : d.atoms()) acc += atom.prob * atom.value;
    return acc;
}

/// Law of r0 + gamma Z for Z ~ d.
inline DiscreteDist pushforward_affine(const DiscreteDist& d, double r0, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw DomainError("pushforward_affine: gamma must lie in [0, 1)");
    }
    if (gamma == 0.0) return DiscreteDist::dirac(r0);
    std::vector<Atom> atoms;
    atoms.reserve(d.size());
    for (const Atom& atom : d.atoms()) atoms.push_back({r0 + gamma * atom.value, atom.prob});
    return DiscreteDist::from_unchecked(std::move(atoms), true);
}

inline double avar_left(const DiscreteDist& d, double alpha) {
    detail::check_level(alpha, "avar_left");
    return left_avar_sorted(d.atoms(), alpha);
}

/// Right AVaR at `level`: the mean of the upper `level` fraction of the mass.
inline double avar_right(const DiscreteDist& d, double level) {
    detail::check_level(level, "avar_right");
    double upto = 0.0;
    double acc = 0.0;
    const double cut = 1.0 - level;
    for (const Atom& atom : d.atoms()) {
        upto += atom.prob;
        acc += std::max(0.0, std::min(atom.prob, upto - cut)) * atom.value;
    }
    return acc / level;
}

struct AvarDual {
    double value = 0.0;
    /// Minimizing weights, aligned with d.atoms().
    std::vector<double> weights;
};

/**
 * Left AVaR through its dual: minimize (1/alpha) <lambda, v> over
 * 0 <= lambda_i <= p_i, sum lambda_i = alpha. The minimum fills the lowest
 * values first.
 */
inline AvarDual avar_left_dual(const DiscreteDist& d, double alpha) {
    detail::check_level(alpha, "avar_left_dual");
    AvarDual out;
    out.weights.assign(d.size(), 0.0);
    double remaining = alpha;
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size() && remaining > 0.0; ++i) {
        const Atom& atom = d.atoms()[i];
        const double take = std::min(atom.prob, remaining);
        out.weights[i] = take;
        acc += take * atom.value;
        remaining -= take;
    }
    out.value = acc / alpha;
    return out;
}

/// Best W2 approximation of d by alpha * delta(t1) + (1 - alpha) * delta(t2), t1 <= t2.
inline Diatomic project_w2_diatomic(const DiscreteDist& d, double alpha) {
    detail::check_level(alpha, "project_w2_diatomic");
    const double left = left_avar_sorted(d.atoms(), alpha);
    const double right = right_avar_sorted(d.atoms(), alpha);
    return Diatomic(left, right, alpha);
}

/**
 * p-Wasserstein distance, p >= 1 or p = infinity, computed exactly on the
 * merged grid of both cumulative-probability breakpoints.
 */
inline double wasserstein(const DiscreteDist& lhs, const DiscreteDist& rhs, double p) {
    const bool sup = std::isinf(p);
    if (!sup && !(p >= 1.0)) throw DomainError("wasserstein: order must be >= 1 or infinity");
    const auto& a = lhs.atoms();
    const auto& b = rhs.atoms();
    std::size_t i = 0, j = 0;
    double cum_a = a[0].prob, cum_b = b[0].prob;
    double prev = 0.0;
    double acc = 0.0;
    while (true) {
        const double next = std::min(cum_a, cum_b);
        const double len = next - prev;
        const double gap = std::abs(a[i].value - b[j].value);
        if (sup) {
            if (len > kQuantileCellTolerance) acc = std::max(acc, gap);
        } else if (len > 0.0) {
            acc += len * std::pow(gap, p);
        }
        prev = next;
        const bool step_a = cum_a <= next;
        const bool step_b = cum_b <= next;
        if (step_a) {
            if (++i == a.size()) break;
            cum_a += a[i].prob;
        }
        if (step_b) {
            if (++j == b.size()) break;
            cum_b += b[j].prob;
        }
    }
    return sup ? acc : std::pow(acc, 1.0 / p);
}

/// Weighted mixture sum_k w_k d_k; weights must be non-negative and sum to 1.
inline DiscreteDist mix(const std::vector<std::pair<double, DiscreteDist>>& components) {
    if (components.empty()) throw DomainError("mix: no components");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [weight, dist] : components) {
        if (!(weight >= 0.0)) throw DomainError("mix: weights must be non-negative");
        total += weight;
        count += dist.size();
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
        throw DomainError("mix: weights sum to " + std::to_string(total));
    }
    std::vector<Atom> atoms;
    atoms.reserve(count);
    for (const auto& [weight, dist] : components) {
        if (weight == 0.0) continue;
        for (const Atom& atom : dist.atoms()) atoms.push_back({atom.value, weight * atom.prob});
    }
    return DiscreteDist::from_unchecked(std::move(atoms));
}

} // namespace diatomic
