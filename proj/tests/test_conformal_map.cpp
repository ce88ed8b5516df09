#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tractlab/conformal_map.hpp"

using namespace tractlab;

namespace {

// The straight half-strip model in closed form.
cplx F0(cplx z) { return 5.0 * std::sinh((z - 4.0) / 2.0) / std::sinh(0.5); }
cplx F0_inv(cplx w) { return 4.0 + 2.0 * std::asinh(w * std::sinh(0.5) / 5.0); }

const MapKernel& straight() {
    static const MapKernel k = MapKernel::build({});
    return k;
}
const MapKernel& one_wiggle() {
    static const MapKernel k = MapKernel::build({{20}, {30}});
    return k;
}

}  // namespace

TEST(ClosedForm, OracleSelfChecks) {
    EXPECT_NEAR(std::abs(F0(5.0) - 5.0), 0.0, 1e-14);
    EXPECT_NEAR(F0(6.0).real(), 11.2763, 1e-4);
    EXPECT_NEAR(std::abs(F0_inv(F0(cplx(7, 1))) - cplx(7, 1)), 0.0, 1e-13);
    // left edge to the imaginary axis
    EXPECT_NEAR(F0(cplx(4, 1.3)).real(), 0.0, 1e-14);
}

TEST(Kernel, NormalisedAtFive) {
    for (const MapKernel* k : {&straight(), &one_wiggle()}) {
        const LogPolarPoint w = k->forward(5.0);
        EXPECT_NEAR(w.lambda, std::log(5.0), 1e-10);
        EXPECT_NEAR(w.theta, 0.0, 1e-10);
        EXPECT_NEAR(std::abs(k->inverse(cplx(5, 0)) - 5.0), 0.0, 1e-9);
    }
}

TEST(Kernel, StraightStripMatchesClosedForm) {
    const MapKernel& k = straight();
    EXPECT_NEAR(k.forward(6.0).lambda, std::log(11.2763), 1e-5);
    double worst = 0;
    for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 12; ++j) {
            const cplx z(4.5 + 25.5 * i / 40, -3.0 + 6.0 * j / 12);
            worst = std::max(worst, std::abs(k.forward(z).value() / F0(z) - 1.0));
        }
    EXPECT_LE(worst, 1e-6);
}

TEST(Kernel, StraightInverseOnRealAxis) {
    for (double t : {4.0, 5.0, 11.0, 100.0, 1e6}) EXPECT_NEAR(straight().inverse(cplx(t, 0)).real(), F0_inv(t).real(), 1e-9);
}

TEST(Kernel, BoundaryCorrespondence) {
    // left edge near the corner goes near the positive imaginary axis
    const LogPolarPoint w = straight().forward(cplx(4.0 + 1e-7, kPi - 1e-3));
    EXPECT_NEAR(w.theta, kPi / 2, 1e-3);
}

TEST(Kernel, DerivativeAtFive) {
    const DerivativeEstimate d = straight().derivative_modulus(5.0);
    EXPECT_NEAR(d.value, 2.5 / std::tanh(0.5), 1e-8);
    EXPECT_GE(d.value, 2.5);
}

// Property: the inverse undoes the forward map on random interior points.
TEST(Kernel, RoundTripProperty) {
    for (const MapKernel* k : {&straight(), &one_wiggle()}) {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> ux(4.0, default_xmax(k->spec())), uy(-kPi, kPi);
        int n = 0;
        while (n < 300) {
            const cplx z(ux(rng), uy(rng));
            if (!contains(k->spec(), z) || boundary_distance(k->spec(), z) < 1e-6) continue;
            ++n;
            EXPECT_LE(std::abs(k->inverse(k->forward(z)) - z), 10 * k->eps_map()) << z;
        }
    }
}

// Property: |F'| >= Re F / 2 and in particular >= 2 once Re F >= 4.
TEST(Kernel, ExpansionProperty) {
    std::mt19937_64 rng(12);
    const MapKernel& k = one_wiggle();
    std::uniform_real_distribution<double> ux(4.0, 50.0), uy(-kPi, kPi);
    int n = 0;
    while (n < 300) {
        const cplx z(ux(rng), uy(rng));
        if (!contains(k.spec(), z) || boundary_distance(k.spec(), z) < 1e-3) continue;
        ++n;
        const double log_re = k.forward(z).log_re();
        const double log_d = k.derivative_modulus(z).log_value;
        EXPECT_GE(log_d, log_re - std::log(2.0) + std::log1p(-1e-4)) << z;
        if (log_re >= std::log(4.0)) EXPECT_GE(log_d, std::log(2.0) + std::log1p(-1e-4));
    }
}

TEST(Kernel, EpsMapIsSmall) {
    EXPECT_LT(straight().eps_map(), 1e-9);
    EXPECT_LT(one_wiggle().eps_map(), 1e-9);
    EXPECT_LE(straight().round_trip_error(), straight().eps_map());
}

TEST(Kernel, OutsidePointsThrow) {
    EXPECT_THROW(straight().forward(cplx(3, 0)), DomainError);
    EXPECT_THROW(one_wiggle().forward(cplx(25, 3.5)), DomainError);
    EXPECT_NO_THROW(one_wiggle().forward(cplx(25, 2.5)));  // top channel of the wiggle
}

TEST(Kernel, JsonRoundTripPreservesValues) {
    const MapKernel back = MapKernel::from_json(one_wiggle().to_json());
    EXPECT_EQ(back.fingerprint(), one_wiggle().fingerprint());
    const cplx z(24.3, 0.4);
    EXPECT_NEAR(std::abs(back.forward(z).value() - one_wiggle().forward(z).value()), 0.0, 1e-9 * std::abs(one_wiggle().forward(z).value()));
}

TEST(Geodesics, StraightStripDiameterBounded) {
    const NuEstimate e = straight().estimate_nu();
    // geodesics of the half-strip are cross-cuts; their diameter is at most the width plus the reach past Re = 4
    EXPECT_TRUE(std::isfinite(e.nu));
    EXPECT_GE(e.nu, 2 * kPi - 1e-6);
    EXPECT_LE(e.nu, 2 * kPi + 1.0);
}

TEST(Geodesics, OneWiggleDiameterFinite) {
    const NuEstimate a = one_wiggle().estimate_nu(0.1, 64), b = one_wiggle().estimate_nu(0.05, 128);
    EXPECT_TRUE(std::isfinite(a.nu));
    EXPECT_NEAR(a.nu / b.nu, 1.0, 0.01);
    EXPECT_GT(a.nu, 2 * kPi);
}
