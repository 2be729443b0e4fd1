#include "fixtures.hpp"
#include "oracles.hpp"

#include <limits>

using namespace diatomic;
using fixtures::fig4;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

TEST(DiscreteDist, CanonicalFormSortsMergesAndDropsZeros) {
    const DiscreteDist d({{3.0, 0.25}, {1.0, 0.25}, {3.0, 0.25}, {2.0, 0.0}, {1.0 + 1e-13, 0.25}});
    ASSERT_EQ(d.size(), 2u);
    EXPECT_NEAR(d.atoms()[0].value, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(d.atoms()[0].prob, 0.5);
    EXPECT_DOUBLE_EQ(d.atoms()[1].value, 3.0);
}

TEST(DiscreteDist, RejectsInvalidAtoms) {
    EXPECT_THROW(DiscreteDist(std::vector<Atom>{}), DomainError);
    EXPECT_THROW(DiscreteDist({{0.0, 0.5}, {1.0, 0.4}}), DomainError);
    EXPECT_THROW(DiscreteDist({{0.0, 1.5}, {1.0, -0.5}}), DomainError);
    EXPECT_THROW(DiscreteDist({{std::nan(""), 1.0}}), DomainError);
}

TEST(Quantile, Fig4Median) { EXPECT_DOUBLE_EQ(quantile(fig4(), 0.5), -1.0); }

TEST(Quantile, DiracAndDomain) {
    const auto d = DiscreteDist::dirac(2.5);
    for (double tau : {1e-9, 0.3, 1.0}) EXPECT_DOUBLE_EQ(quantile(d, tau), 2.5);
    EXPECT_THROW(quantile(d, 0.0), DomainError);
    EXPECT_THROW(quantile(d, 1.5), DomainError);
}

TEST(Quantile, MatchesScanOracle) {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const DiscreteDist d = random_dist(rng, 10);
        for (int k = 1; k <= 37; ++k) {
            const double tau = k / 37.0;
            EXPECT_DOUBLE_EQ(quantile(d, tau), oracles::quantile_scan(d.atoms(), tau));
        }
    }
}

TEST(Expectation, Fig4AndTrivialCases) {
    EXPECT_NEAR(expectation(fig4()), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(expectation(DiscreteDist::dirac(-4.0)), -4.0);
    const double alpha = 0.3;
    EXPECT_NEAR(expectation(DiscreteDist({{-2.0, alpha}, {5.0, 1 - alpha}})), alpha * -2.0 + (1 - alpha) * 5.0,
                1e-15);
}

TEST(Expectation, EqualsIntegralOfQuantile) {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const DiscreteDist d = random_dist(rng, 12);
        double integral = 0.0;
        double prev = 0.0;
        double cum = 0.0;
        for (const Atom& a : d.atoms()) {
            cum += a.prob;
            integral += (cum - prev) * quantile(d, 0.5 * (prev + cum));
            prev = cum;
        }
        double direct = 0.0;
        for (const Atom& a : d.atoms()) direct += a.prob * a.value;
        EXPECT_NEAR(expectation(d), direct, 1e-10);
        EXPECT_NEAR(expectation(d), integral, 1e-10);
    }
}

TEST(Pushforward, Cases) {
    EXPECT_TRUE(fixtures::dists_near(pushforward_affine(DiscreteDist::dirac(2.0), 1.0, 0.5), DiscreteDist::dirac(2.0),
                                     1e-15));
    EXPECT_TRUE(fixtures::dists_near(pushforward_affine(fig4(), 3.0, 0.0), DiscreteDist::dirac(3.0), 0.0));
    const DiscreteDist expected({{-2.5, 0.2}, {-0.5, 0.4}, {2.0, 0.2}, {4.0, 0.2}});
    EXPECT_TRUE(fixtures::dists_near(pushforward_affine(fig4(), 0.0, 0.5), expected, 1e-15));
    EXPECT_THROW(pushforward_affine(fig4(), 0.0, 1.0), DomainError);
}

TEST(Avar, Fig4GoldenValues) {
    EXPECT_NEAR(avar_left(fig4(), 0.7), -1.0 / 0.7, 1e-12);
    EXPECT_NEAR(avar_right(fig4(), 0.3), 2.0 / 0.3, 1e-12);
}

TEST(Avar, DiracAndSymmetricSplit) {
    for (double alpha : {0.1, 0.5, 0.9}) {
        EXPECT_DOUBLE_EQ(avar_left(DiscreteDist::dirac(3.0), alpha), 3.0);
        EXPECT_DOUBLE_EQ(avar_right(DiscreteDist::dirac(3.0), 1 - alpha), 3.0);
    }
    const DiscreteDist half({{0.0, 0.5}, {10.0, 0.5}});
    EXPECT_DOUBLE_EQ(avar_left(half, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(avar_right(half, 0.5), 10.0);
}

TEST(Avar, LevelOutsideUnitIntervalIsDomainError) {
    EXPECT_THROW(avar_left(fig4(), 0.0), DomainError);
    EXPECT_THROW(avar_left(fig4(), 1.0), DomainError);
    EXPECT_THROW(avar_right(fig4(), 1.2), DomainError);
    EXPECT_THROW(project_w2_diatomic(fig4(), -0.1), DomainError);
}

TEST(Avar, MatchesRockafellarUryasevOracle) {
    Rng rng(47);
    for (int trial = 0; trial < 300; ++trial) {
        const DiscreteDist d = random_dist(rng, 15);
        const double alpha = random_level(rng);
        EXPECT_NEAR(avar_left(d, alpha), oracles::avar_left_ru(d.atoms(), alpha), 1e-10);
        EXPECT_NEAR(avar_right(d, 1 - alpha), oracles::avar_right_ru(d.atoms(), 1 - alpha), 1e-10);
    }
}

TEST(Avar, TieOrderDoesNotMatter) {
    // Repeated values in unsorted particle lists, in two different orders.
    const std::vector<Atom> forward{{1.0, 0.1}, {1.0, 0.2}, {2.0, 0.3}, {2.0, 0.1}, {0.5, 0.3}};
    std::vector<Atom> backward(forward.rbegin(), forward.rend());
    auto sorted = [](std::vector<Atom> atoms) {
        std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.value < r.value; });
        return atoms;
    };
    for (double alpha : {0.2, 0.35, 0.5, 0.6, 0.9}) {
        EXPECT_NEAR(left_avar_sorted(sorted(forward), alpha), left_avar_sorted(sorted(backward), alpha), 1e-12);
        EXPECT_NEAR(right_avar_sorted(sorted(forward), alpha), right_avar_sorted(sorted(backward), alpha), 1e-12);
    }
}

TEST(AvarDual, Fig4GreedyWeights) {
    const AvarDual dual = avar_left_dual(fig4(), 0.7);
    EXPECT_NEAR(dual.value, -1.0 / 0.7, 1e-12);
    const std::vector<double> expected{0.2, 0.4, 0.1, 0.0};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(dual.weights[i], expected[i], 1e-15);
}

TEST(AvarDual, SmallLevelPicksLowestAtom) {
    EXPECT_DOUBLE_EQ(avar_left_dual(fig4(), 0.15).value, -5.0);
}

TEST(AvarDual, FeasibleAndEqualToClosedForm) {
    Rng rng(53);
    for (int trial = 0; trial < 300; ++trial) {
        const DiscreteDist d = random_dist(rng, 15);
        const double alpha = random_level(rng);
        const AvarDual dual = avar_left_dual(d, alpha);
        double mass = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_GE(dual.weights[i], 0.0);
            EXPECT_LE(dual.weights[i], d.atoms()[i].prob);
            mass += dual.weights[i];
        }
        EXPECT_NEAR(mass, alpha, 1e-12);
        EXPECT_NEAR(dual.value, avar_left(d, alpha), 1e-12);
    }
}

TEST(Projection, Fig4AndDirac) {
    const Diatomic dia = project_w2_diatomic(fig4(), 0.7);
    EXPECT_NEAR(dia.theta1(), -1.0 / 0.7, 1e-12);
    EXPECT_NEAR(dia.theta2(), 2.0 / 0.3, 1e-12);
    const Diatomic c = project_w2_diatomic(DiscreteDist::dirac(1.5), 0.4);
    EXPECT_DOUBLE_EQ(c.theta1(), 1.5);
    EXPECT_DOUBLE_EQ(c.theta2(), 1.5);
    EXPECT_THROW(Diatomic(2.0, 1.0, 0.5), DomainError);
}

TEST(Projection, BeatsRandomDiatomicCandidates) {
    Rng rng(59);
    std::uniform_real_distribution<double> value(-12.0, 12.0);
    for (int trial = 0; trial < 20; ++trial) {
        const DiscreteDist d = random_dist(rng, 8);
        const double alpha = random_level(rng);
        const Diatomic best = project_w2_diatomic(d, alpha);
        const double w_best = wasserstein(d, best.to_dist(), 2.0);
        for (int c = 0; c < 1000; ++c) {
            double t1 = value(rng), t2 = value(rng);
            if (t1 > t2) std::swap(t1, t2);
            EXPECT_LE(w_best, wasserstein(d, Diatomic(t1, t2, alpha).to_dist(), 2.0) + 1e-12);
        }
    }
}

TEST(Wasserstein, TrivialCases) {
    const DiscreteDist d = fig4();
    for (double p : {1.0, 2.0, 3.5, kInf}) EXPECT_DOUBLE_EQ(wasserstein(d, d, p), 0.0);
    EXPECT_DOUBLE_EQ(wasserstein(DiscreteDist::dirac(0.0), DiscreteDist::dirac(3.0), 2.0), 3.0);
    EXPECT_THROW(wasserstein(d, d, 0.5), DomainError);
}

TEST(Wasserstein, MatchesGridQuadrature) {
    // Masses on a 1/64 grid, so midpoint quadrature on a multiple of 64 cells is exact.
    Rng rng(61);
    std::uniform_int_distribution<int> value(-40, 40);
    auto dyadic = [&] {
        std::vector<Atom> atoms;
        int left = 64;
        while (left > 0) {
            const int m = std::min(left, std::uniform_int_distribution<int>(1, 20)(rng));
            atoms.push_back({value(rng) / 4.0 + 0.01 * static_cast<double>(atoms.size()), m / 64.0});
            left -= m;
        }
        return DiscreteDist(std::move(atoms));
    };
    for (int trial = 0; trial < 30; ++trial) {
        const DiscreteDist a = dyadic();
        const DiscreteDist b = dyadic();
        for (double p : {1.0, 2.0, 3.0}) {
            EXPECT_NEAR(wasserstein(a, b, p), oracles::wasserstein_grid(a, b, p, 64 * 1024), 1e-6) << "p = " << p;
        }
    }
}

TEST(Wasserstein, GridQuadratureExactOnDyadicMasses) {
    // Masses on a 1/8 grid make midpoint quadrature exact with 8k cells.
    const DiscreteDist a({{0.0, 0.125}, {1.0, 0.375}, {4.0, 0.5}});
    const DiscreteDist b({{-1.0, 0.25}, {2.0, 0.25}, {3.0, 0.5}});
    for (double p : {1.0, 2.0, 3.0}) EXPECT_NEAR(wasserstein(a, b, p), oracles::wasserstein_grid(a, b, p, 8000), 1e-6);
}

TEST(Mix, Cases) {
    EXPECT_EQ(mix({{1.0, fig4()}}), fig4());
    EXPECT_EQ(mix({{0.5, DiscreteDist::dirac(0.0)}, {0.5, DiscreteDist::dirac(0.0)}}), DiscreteDist::dirac(0.0));
    const DiscreteDist uniform4({{1.25, 0.25}, {1.75, 0.25}, {2.25, 0.25}, {2.75, 0.25}});
    EXPECT_TRUE(fixtures::dists_near(mix({{0.25, DiscreteDist::dirac(2.25)},
                                          {0.25, DiscreteDist::dirac(1.25)},
                                          {0.25, DiscreteDist::dirac(2.75)},
                                          {0.25, DiscreteDist::dirac(1.75)}}),
                                     uniform4, 1e-15));
    EXPECT_THROW(mix({{0.6, fig4()}, {0.6, fig4()}}), DomainError);
    EXPECT_THROW(mix({{-0.5, fig4()}, {1.5, fig4()}}), DomainError);
}

TEST(DistProperties, AveragingIdentity) {
    Rng rng(67);
    for (int trial = 0; trial < 500; ++trial) {
        const DiscreteDist d = random_dist(rng, 20);
        const double alpha = random_level(rng);
        EXPECT_NEAR(alpha * avar_left(d, alpha) + (1 - alpha) * avar_right(d, 1 - alpha), expectation(d), 1e-10);
    }
}

TEST(DistProperties, AvarMonotoneInLevel) {
    // The lower-tail mean grows with its level; the upper-tail mean shrinks as its level grows.
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        const DiscreteDist d = random_dist(rng, 20);
        double prev_left = -kInf, prev_right = kInf;
        for (int k = 1; k < 50; ++k) {
            const double level = k / 50.0;
            const double left = avar_left(d, level);
            const double right = avar_right(d, level);
            EXPECT_GE(left, prev_left - 1e-12);
            EXPECT_LE(right, prev_right + 1e-12);
            prev_left = left;
            prev_right = right;
        }
    }
}

TEST(DistProperties, ProjectionIsWInfNonExpansive) {
    Rng rng(73);
    for (int trial = 0; trial < 300; ++trial) {
        const DiscreteDist a = random_dist(rng, 10);
        const DiscreteDist b = random_dist(rng, 10);
        const double alpha = random_level(rng);
        const double projected =
            wasserstein(project_w2_diatomic(a, alpha).to_dist(), project_w2_diatomic(b, alpha).to_dist(), kInf);
        EXPECT_LE(projected, wasserstein(a, b, kInf) + 1e-12);
    }
}

TEST(DistProperties, AvarsBracketTheMean) {
    Rng rng(79);
    for (int trial = 0; trial < 300; ++trial) {
        const DiscreteDist d = random_dist(rng, 20);
        const double alpha = random_level(rng);
        EXPECT_LE(avar_left(d, alpha), expectation(d) + 1e-12);
        EXPECT_LE(expectation(d), avar_right(d, 1 - alpha) + 1e-12);
    }
}
