#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tractlab/projection.hpp"

using namespace tractlab;

namespace {

double phi0(double t) { return 4.0 + 2.0 * std::asinh(t * std::sinh(0.5) / 5.0); }
double F0(double x) { return 5.0 * std::sinh((x - 4.0) / 2.0) / std::sinh(0.5); }

const ProjectionMap& straight() {
    static const ProjectionMap p = ProjectionMap::build(std::make_shared<MapKernel>(MapKernel::build({})));
    return p;
}
const ProjectionMap& one_wiggle() {
    static const ProjectionMap p = ProjectionMap::build(std::make_shared<MapKernel>(MapKernel::build({{20}, {30}})));
    return p;
}

// Grid oracle: roots of phi^n - x on [lo, hi] (log t) by sign changes, refined by bisection.
std::vector<double> grid_roots(const ProjectionMap& phi, double lo, double hi, int n, double x, int cells) {
    auto g = [&](double l) { return phi.iterate_log(l, n) - x; };
    std::vector<double> out;
    double a = lo, ga = g(a);
    for (int i = 1; i <= cells; ++i) {
        const double b = lo + (hi - lo) * i / cells, gb = g(b);
        if ((ga < 0) != (gb < 0)) {
            double u = a, v = b, gu = ga;
            for (int it = 0; it < 60; ++it) {
                const double m = 0.5 * (u + v), gm = g(m);
                if ((gm < 0) == (gu < 0)) {
                    u = m;
                    gu = gm;
                } else {
                    v = m;
                }
            }
            out.push_back(0.5 * (u + v));
        }
        a = b;
        ga = gb;
    }
    return out;
}

// Grid oracle for crookedness: merge the B- and C-crossings in order and look
// for an alternation of length three after collapsing repeats.
bool grid_crooked(const ProjectionMap& phi, double lo, double hi, int n, const Quadruple& q, int cells) {
    std::vector<std::pair<double, char>> marks;
    for (double l : grid_roots(phi, lo, hi, n, q.B, cells)) marks.emplace_back(l, 'B');
    for (double l : grid_roots(phi, lo, hi, n, q.C, cells)) marks.emplace_back(l, 'C');
    std::sort(marks.begin(), marks.end());
    std::string seq;
    for (const auto& m : marks)
        if (seq.empty() || seq.back() != m.second) seq.push_back(m.second);
    return seq.size() >= 3;
}

}  // namespace

TEST(Phi, StraightMatchesClosedForm) {
    const ProjectionMap& p = straight();
    EXPECT_EQ(p.pieces().size(), 1u);
    EXPECT_TRUE(p.turning_points().empty());
    EXPECT_NEAR(p(5.0), 5.0, 1e-10);
    EXPECT_NEAR(p(15.0), 6.4587, 1e-4);
    EXPECT_LT(p(15.0), std::min(15.0 / 2, 5 + 2 * std::log(3.0)));
    for (double t : {4.0, 4.5, 7.0, 15.0, 123.0, 1e5, 1e12}) EXPECT_NEAR(p(t), phi0(t), 1e-9) << t;
}

TEST(Phi, IterateStraight) {
    const ProjectionMap& p = straight();
    EXPECT_DOUBLE_EQ(p.iterate(15.0, 0), 15.0);
    EXPECT_NEAR(p.iterate(15.0, 2), phi0(phi0(15.0)), 1e-9);
    EXPECT_LT(p.iterate(15.0, 2), p(15.0));
}

// Property: iterates are 1/2-Lipschitz per step.
TEST(Phi, IteratedContractionProperty) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ut(4.0, 500.0), uh(0.0, 3.0);
    for (const ProjectionMap* p : {&straight(), &one_wiggle()})
        for (int i = 0; i < 200; ++i) {
            const double t = ut(rng), h = uh(rng);
            for (int n = 1; n <= 3; ++n)
                EXPECT_LE(std::abs(p->iterate(t + h, n) - p->iterate(t, n)), h / std::pow(2.0, n) + 1e-9);
        }
}

TEST(Phi, OneWiggleHasThreePieces) {
    const ProjectionMap& p = one_wiggle();
    ASSERT_EQ(p.pieces().size(), 3u);
    EXPECT_EQ(p.pieces()[0].dir, 1);
    EXPECT_EQ(p.pieces()[1].dir, -1);
    EXPECT_EQ(p.pieces()[2].dir, 1);
    const auto v = p.turning_values();
    ASSERT_EQ(v.size(), 2u);
    // the fold runs from the top channel's far end back to near r + 1
    EXPECT_GT(v[0], 28.0);
    EXPECT_LT(v[0], 30.0);
    EXPECT_GT(v[1], 20.0);
    EXPECT_LT(v[1], 22.0);
    EXPECT_NEAR(p.monotone_above(), v[0], 1e-12);
}

TEST(Preimages, StraightSingleRoot) {
    const auto r = straight().preimages(phi0(15.0), std::log(4.0), std::log(100.0));
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NEAR(std::exp(r[0].lambda), 15.0, 1e-8);
    EXPECT_TRUE(straight().preimages(4.5, std::log(10.0), std::log(100.0)).empty());
}

TEST(Preimages, FoldedMapAgreesWithGridScan) {
    const ProjectionMap& p = one_wiggle();
    for (double x : {21.5, 25.0, 28.7}) {
        const auto r = p.preimages(x);
        const auto g = grid_roots(p, std::log(4.0), 60.0, 1, x, 40000);
        ASSERT_EQ(r.size(), 3u) << x;
        ASSERT_EQ(g.size(), r.size()) << x;
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i].lambda, g[i], 1e-8);
        for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LT(r[i - 1].lambda, r[i].lambda);
    }
}

TEST(Preimages, TangencyIsReported) {
    const ProjectionMap& p = one_wiggle();
    EXPECT_THROW(p.preimages(p.turning_values()[0]), TangencyError);
}

TEST(Covers, BaseCase) {
    const IntervalFamily f = minimal_covers(straight(), {10, 11, 12, 13}, 0);
    ASSERT_EQ(f.intervals.size(), 1u);
    EXPECT_DOUBLE_EQ(std::exp(f.intervals[0].lo), 10.0);
    EXPECT_DOUBLE_EQ(std::exp(f.intervals[0].hi), 13.0);
}

TEST(Covers, StraightFirstPullbackClosedForm) {
    const IntervalFamily f = minimal_covers(straight(), {6, 7, 8, 9}, 1);
    ASSERT_EQ(f.intervals.size(), 1u);
    EXPECT_NEAR(std::exp(f.intervals[0].lo), F0(6.0), 1e-7);
    EXPECT_NEAR(std::exp(f.intervals[0].hi), F0(9.0), 1e-7);
    EXPECT_NEAR(F0(6.0), 11.276, 1e-3);
    EXPECT_NEAR(F0(9.0), 58.053, 1e-3);
    EXPECT_FALSE(f.intervals[0].crooked());
}

TEST(Covers, StraightStaysSingleAndStraight) {
    for (int n = 0; n <= 8; ++n) {
        const IntervalFamily f = minimal_covers(straight(), {10, 11, 12, 13}, n);
        EXPECT_EQ(f.intervals.size(), 1u);
        EXPECT_EQ(f.crooked_count(), 0u);
    }
}

TEST(Covers, Un1AwayFromWiggle) {
    // |I| >= nu0 ~ 6.9 and I outside [r - nu0, R + nu0]
    for (const Quadruple& q : {Quadruple{6, 8.5, 10.5, 13}, Quadruple{40, 43, 45, 48}, Quadruple{70, 71, 72, 90}})
        EXPECT_EQ(minimal_covers(one_wiggle(), q, 1).intervals.size(), 1u);
}

TEST(Covers, FoldedWitnessesMatchGridOracle) {
    const ProjectionMap& p = one_wiggle();
    const Quadruple q{21, 22, 28, 29};
    for (int n = 1; n <= 2; ++n) {
        const IntervalFamily f = minimal_covers(p, q, n);
        ASSERT_FALSE(f.intervals.empty());
        for (const auto& J : f.intervals) {
            ASSERT_FALSE(J.symbolic());
            EXPECT_EQ(J.crooked(), grid_crooked(p, J.lo, J.hi, n, q, 4000)) << "n=" << n << " [" << J.lo << "," << J.hi << "]";
            EXPECT_EQ(J.b_points.size(), grid_roots(p, J.lo, J.hi, n, q.B, 4000).size());
        }
    }
}

TEST(Covers, IsCrookedAgreesWithFamily) {
    const ProjectionMap& p = one_wiggle();
    const Quadruple q{21, 22, 28, 29};
    const IntervalFamily f = minimal_covers(p, q, 1);
    for (const auto& J : f.intervals) EXPECT_EQ(is_crooked(p, J.lo, J.hi, 1, q).has_value(), J.crooked());
}

TEST(Witness, PatternsOnSyntheticLists) {
    const std::vector<Root> b{{1.0, 0.01}, {3.0, 0.01}}, c{{2.0, 0.01}};
    const auto w = find_witness(b, c);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->pattern, Pattern::BCB);
    EXPECT_NEAR(w->margin, 100.0, 1e-9);
    EXPECT_FALSE(find_witness({{1.0, 0.01}}, {{2.0, 0.01}}));
    EXPECT_FALSE(find_witness({{1.0, 0.01}, {1.5, 0.01}}, {{2.0, 0.01}}));
    const auto w2 = find_witness({{2.0, 0.1}}, {{1.0, 0.1}, {4.0, 0.1}});
    ASSERT_TRUE(w2);
    EXPECT_EQ(w2->pattern, Pattern::CBC);
}

TEST(Hypothesis, StraightFailsEverywhere) {
    const HypothesisResult h = hypothesis_check(straight(), {10, 11, 12, 13}, 0, 6);
    EXPECT_FALSE(h.ok);
    for (const auto& [k, m] : h.counts) {
        EXPECT_EQ(k, 0u);
        EXPECT_EQ(m, 1u);
    }
}

TEST(Hypothesis, StabilisationStraight) { EXPECT_EQ(stabilize_n0(straight(), {10, 11, 12, 13}, 6.9), 0); }

TEST(Hypothesis, StabilisationLeftOfWiggle) {
    const ProjectionMap& p = one_wiggle();
    const Quadruple q{9, 10, 11, 12};
    const int n0 = stabilize_n0(p, q, 6.9);
    const IntervalFamily f = minimal_covers(p, q, n0);
    for (const auto& J : f.intervals) EXPECT_TRUE(J.symbolic() || std::exp(J.lo) > 30 + 6.9);
    const auto c0 = minimal_covers(p, q, n0).intervals.size();
    EXPECT_EQ(minimal_covers(p, q, n0 + 1).intervals.size(), c0);
    EXPECT_EQ(minimal_covers(p, q, n0 + 2).intervals.size(), c0);
}

TEST(Quadruples, SizeAndOrder) {
    EXPECT_DOUBLE_EQ((Quadruple{9, 10, 11, 12}.size()), 1.0);
    EXPECT_TRUE((Quadruple{9, 10, 11, 12}.valid()));
    EXPECT_FALSE((Quadruple{6, 7, 8, 9}.valid()));
    const Quadruple q{10, 11, 12, 13}, outer{9.5, 11.5, 11.5, 13.5};
    EXPECT_FALSE(smaller_than(q, outer));  // B~ < C~ is required: here they coincide
    EXPECT_TRUE(smaller_than(q, Quadruple{9.5, 11.2, 11.8, 13.5}));
    EXPECT_DOUBLE_EQ(quadruple_distance(q, Quadruple{9.5, 11.2, 11.8, 13.5}), 0.5);
}
