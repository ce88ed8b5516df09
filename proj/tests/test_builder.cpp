#include <gtest/gtest.h>

#include <cmath>

#include "tractlab/builder.hpp"

using namespace tractlab;

namespace {

// Direct enumeration oracle for the schedule.
std::vector<Quadruple> enumerate(double K, int cap) {
    std::vector<Quadruple> out;
    for (int D = 9; D <= cap; ++D)
        for (int A = 9; A < D; ++A)
            for (int B = A + 1; B < D; ++B)
                for (int C = B + 1; C < D; ++C) {
                    const Quadruple q{double(A), double(B), double(C), double(D)};
                    if (q.size() >= K) out.push_back(q);
                }
    return out;
}

BuildConfig fixed_config() {
    BuildConfig c;
    c.nu0 = 6.906509367997744;  // reference one-wiggle tract, measured
    c.growth_C = 3.45;
    return c;
}

}  // namespace

TEST(Schedule, MatchesEnumeration) {
    for (double K : {1.0, 2.0})
        for (int cap : {13, 16}) {
            const auto s = quadruple_schedule(K, cap), e = enumerate(K, cap);
            ASSERT_EQ(s.size(), e.size()) << K << " " << cap;
            for (const auto& q : e) EXPECT_NE(std::find(s.begin(), s.end(), q), s.end());
        }
    EXPECT_EQ(quadruple_schedule(1, 13).size(), 5u);
}

TEST(Schedule, SizeRuleAndOrder) {
    const auto s1 = quadruple_schedule(1, 13);
    EXPECT_EQ(s1.front(), (Quadruple{9, 10, 11, 12}));
    const auto s2 = quadruple_schedule(2, 15);
    EXPECT_EQ(std::find(s2.begin(), s2.end(), Quadruple{9, 10, 11, 12}), s2.end());
    EXPECT_NE(std::find(s2.begin(), s2.end(), Quadruple{9, 11, 13, 15}), s2.end());
    for (std::size_t i = 1; i < s1.size(); ++i) {
        const auto& a = s1[i - 1];
        const auto& b = s1[i];
        EXPECT_TRUE(std::tie(a.D, a.A, a.B, a.C) < std::tie(b.D, b.A, b.B, b.C));
    }
}

TEST(Chain, ShrinkIsSmaller) {
    const Quadruple q{10, 11, 12, 13};
    const Quadruple s = shrink(q, 0.375);
    EXPECT_EQ(s, (Quadruple{10.375, 10.625, 12.375, 12.625}));
    EXPECT_TRUE(smaller_than(s, q));
    EXPECT_DOUBLE_EQ(quadruple_distance(s, q), 0.375);
}

TEST(Guard, Formula) {
    const GuardParams g{4, 3.5, 6.9};
    EXPECT_DOUBLE_EQ(lower_order_guard({}, g), 4 * (6.9 / 2 + 3.5 * 6) + 6.9);
    EXPECT_DOUBLE_EQ(lower_order_guard({{20}, {30}}, g), 4 * (6.9 / 2 + 3.5 * 31) + 6.9);
}

TEST(Growth, StraightSlopeMatchesClosedForm) {
    const MapKernel k = MapKernel::build({});
    const auto g = measure_growth(k, {10, 30, 45, 60});
    for (const auto& s : g) {
        const double expect = std::log(5 * std::sinh((s.r - 4) / 2) / std::sinh(0.5)) / s.r;
        EXPECT_NEAR(s.s, expect, 1e-6) << s.r;
        if (s.r >= 30) EXPECT_NEAR(s.s, 0.5, 0.05);
    }
}

TEST(Growth, ConstantBoundsHoldOnFreshSamples) {
    const MapKernel k = MapKernel::build({{20}, {30}});
    const GrowthFit fit = measure_growth_constant(k, 500, 1);
    EXPECT_GT(fit.C, 1.0);
    EXPECT_LT(fit.C, 10.0);
    EXPECT_LE(measure_growth_constant(k, 500, 2).C, 1.1 * fit.C);
}

TEST(Rho, DegenerateProbeWindowIsZero) {
    auto k = std::make_shared<MapKernel>(MapKernel::build({}));
    const ProjectionMap phi = ProjectionMap::build(k);
    // tau below 4: no iterate qualifies, the sup is over an empty set
    EXPECT_EQ(rho_probe_sup(phi, phi, 3.0, 100.0), 0.0);
    EXPECT_EQ(rho_probe_sup(phi, phi, 20.0, 100.0), 0.0);
}

TEST(Rho, LooseToleranceTakesFirstCandidate) {
    auto k = std::make_shared<MapKernel>(MapKernel::build({}));
    const ProjectionMap phi = ProjectionMap::build(k);
    const RhoReport r = choose_rho(phi, 10.0, 20.0, 4);
    EXPECT_TRUE(r.achieved);
    EXPECT_DOUBLE_EQ(r.rho, 7.0);
    ASSERT_EQ(r.sups.size(), 1u);
}

TEST(Certificate, JsonRoundTripKeepsCanonicalContent) {
    Certificate c;
    c.q = {10, 11, 12, 13};
    c.n_star = 2;
    c.total = 1;
    c.crooked = {true};
    c.persists = true;
    c.min_margin = 12.5;
    c.kernel_fingerprint = "abc";
    const Certificate back = Certificate::from_json(c.to_json());
    EXPECT_EQ(back.canonical().dump(), c.canonical().dump());
    EXPECT_DOUBLE_EQ(back.min_margin, 12.5);
}

TEST(Config, JsonRoundTrip) {
    BuildConfig c = fixed_config();
    c.stages = 3;
    const BuildConfig back = BuildConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
}

// One full stage from the straight strip; shared by the tests below.
class Stage : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        state_ = new BuildState;
        report_ = new StageReport(run_stage(*state_, {10, 11, 12, 13}, fixed_config()));
    }
    static void TearDownTestSuite() {
        delete state_;
        delete report_;
    }
    static BuildState* state_;
    static StageReport* report_;
};
BuildState* Stage::state_ = nullptr;
StageReport* Stage::report_ = nullptr;

TEST_F(Stage, AppendsOneWiggleAndCertifies) {
    ASSERT_TRUE(report_->ok) << report_->message;
    EXPECT_EQ(report_->m, 1u);
    ASSERT_EQ(state_->spec.size(), 1u);
    EXPECT_TRUE(validate_spec(state_->spec).ok);
    ASSERT_TRUE(report_->certificate);
    EXPECT_TRUE(report_->certificate->persists);
    EXPECT_GT(report_->certificate->min_margin, 10.0);
    ASSERT_EQ(report_->m_trace.size(), 1u);
    EXPECT_EQ(report_->m_trace[0], 0u);
}

TEST_F(Stage, WiggleSitsOverTheFirstPullback) {
    // chain start S0 = Q shrunk by |Q|/8; its first pullback under the sinh model
    const auto F0 = [](double x) { return 5 * std::sinh((x - 4) / 2) / std::sinh(0.5); };
    const double nu0 = *fixed_config().nu0;
    EXPECT_NEAR(state_->spec.r[0], F0(10.875) - nu0, 1e-6);
    EXPECT_NEAR(state_->spec.R[0], F0(12.125) + nu0, 1e-6);
    EXPECT_GE(state_->spec.r[0], state_->rho_history.at(0));
}

TEST_F(Stage, CertificateReverifiesAtHalvedEps) {
    MapOptions opt;
    opt.eps_target *= 0.5;
    Certificate fresh;
    EXPECT_TRUE(reverify(*report_->certificate, state_->spec, opt, &fresh));
    EXPECT_EQ(fresh.canonical().dump(), report_->certificate->canonical().dump());
}

TEST_F(Stage, SurvivesALaterWiggle) {
    WiggleSpec next = state_->spec;
    next.r.push_back(state_->spec.R[0] + 4);
    next.R.push_back(state_->spec.R[0] + 8);
    EXPECT_TRUE(reverify(*report_->certificate, next, {}));
}

TEST_F(Stage, PlacementIsNoOpOnceCrooked) {
    auto k = std::make_shared<MapKernel>(MapKernel::build(state_->spec));
    const ProjectionMap phi = ProjectionMap::build(k);
    const PlaceReport p = place_wiggle(phi, {10, 11, 12, 13}, *fixed_config().nu0, 0.0);
    EXPECT_FALSE(p.placed);
    EXPECT_EQ(p.non_crooked, 0u);
    EXPECT_NE(p.message.find("m = 0"), std::string::npos);
}

TEST_F(Stage, Deterministic) {
    BuildState again;
    const StageReport r = run_stage(again, {10, 11, 12, 13}, fixed_config());
    ASSERT_TRUE(r.ok);
    EXPECT_EQ(again.spec, state_->spec);
    EXPECT_EQ(again.to_json().dump(), state_->to_json().dump());
}

TEST_F(Stage, StateJsonRoundTrip) {
    const BuildState back = BuildState::from_json(state_->to_json());
    EXPECT_EQ(back.spec, state_->spec);
    EXPECT_EQ(back.certificates.size(), 1u);
    EXPECT_EQ(back.certificates[0].canonical().dump(), state_->certificates[0].canonical().dump());
}
