#pragma once

#include "diatomic/diatomic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

namespace fixtures {

using namespace diatomic;

/// Two states, two actions, gamma = 1/2. a1 stays put; a2 jumps to either state w.p. 1/2.
/// r(x1,a1) = 1, r(x1,a2) = 1/2, r(x2,a1) = 2, r(x2,a2) = 5/2.
inline Mdp fig1(double gamma = 0.5) {
    std::vector<double> p(8, 0.0);
    std::vector<double> r(8, 0.0);
    auto at = [](std::size_t x, std::size_t a, std::size_t y) { return (x * 2 + a) * 2 + y; };
    const double r1[2] = {1.0, 2.0};
    const double r2[2] = {0.5, 2.5};
    for (std::size_t x = 0; x < 2; ++x) {
        p[at(x, 0, x)] = 1.0;
        r[at(x, 0, x)] = r1[x];
        for (std::size_t y = 0; y < 2; ++y) {
            p[at(x, 1, y)] = 0.5;
            r[at(x, 1, y)] = r2[x];
        }
    }
    return Mdp(2, 2, std::move(p), std::move(r), gamma, {"x1", "x2"}, {"a1", "a2"});
}

inline DiscreteDist fig4() { return DiscreteDist({{-5.0, 0.2}, {-1.0, 0.4}, {4.0, 0.2}, {8.0, 0.2}}); }

/// One state, one action, constant reward c.
inline Mdp single(double c, double gamma) { return Mdp(1, 1, {1.0}, {c}, gamma); }

inline std::string data_path(const std::string& name) { return std::string(DIATOMIC_DATA_DIR) + "/" + name; }

inline ::testing::AssertionResult tables_near(const QTable& lhs, const QTable& rhs, double tol) {
    if (!lhs.same_shape(rhs)) return ::testing::AssertionFailure() << "shape mismatch";
    for (StateId x = 0; x < lhs.n_states(); ++x) {
        for (ActionId a = 0; a < lhs.n_actions(); ++a) {
            if (!(std::abs(lhs(x, a) - rhs(x, a)) <= tol)) {
                return ::testing::AssertionFailure() << "(" << x << "," << a << "): " << lhs(x, a) << " vs "
                                                     << rhs(x, a) << " (tol " << tol << ")";
            }
        }
    }
    return ::testing::AssertionSuccess();
}

inline ::testing::AssertionResult dists_near(const DiscreteDist& lhs, const DiscreteDist& rhs, double tol) {
    if (lhs.size() != rhs.size()) {
        return ::testing::AssertionFailure() << "atom counts " << lhs.size() << " vs " << rhs.size();
    }
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const Atom& l = lhs.atoms()[i];
        const Atom& r = rhs.atoms()[i];
        if (!(std::abs(l.value - r.value) <= tol && std::abs(l.prob - r.prob) <= tol)) {
            return ::testing::AssertionFailure() << "atom " << i << ": (" << l.value << "," << l.prob << ") vs ("
                                                 << r.value << "," << r.prob << ")";
        }
    }
    return ::testing::AssertionSuccess();
}

/// Q restricted to offered actions, everything else zeroed, so tables from
/// reduced MDPs compare cleanly.
inline QTable offered_only(const Mdp& mdp, QTable q) {
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            if (!mdp.offers(x, a)) q(x, a) = 0.0;
        }
    }
    return q;
}

} // namespace fixtures
