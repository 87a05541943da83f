#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "exo/lowlevel_controller.hpp"

using namespace exo;

TEST(FrictionRate, Branches) {
    const HlEstimates est{0, 0, 8, 5000};
    const double eps = 1e-3;
    EXPECT_DOUBLE_EQ(friction_derivative_approx(0.5, 2.0, est, 10.0, eps), -8 - 5000 * 2.0 - 10 * 0.5);
    EXPECT_DOUBLE_EQ(friction_derivative_approx(-0.5, 2.0, est, 10.0, eps), 8 - 5000 * 2.0 + 10 * 0.5);
    EXPECT_DOUBLE_EQ(friction_derivative_approx(0.0, 2.0, est, 10.0, eps), (-8 - 5000 * eps) / eps);
    EXPECT_DOUBLE_EQ(friction_derivative_approx(-eps, 0.0, est, 0.0, eps), (-8 - 5000 * eps) / eps);
    EXPECT_DOUBLE_EQ(friction_derivative_approx(eps, 0.0, est, 0.0, eps), -8.0);
}

TEST(ForceError, Difference) {
    EXPECT_EQ(force_error(100.0, 100.0), 0.0);
    EXPECT_EQ(force_error(150.0, 100.0), 50.0);
}

TEST(F4, LinearInLoadForceAndSingularN1) {
    F4Inputs in;
    in.coeffs = {2.0, 3.0, 5.0, 7.0, 11.0};
    in.piston_rate = 0.1;
    in.load_force = 100.0;
    in.compensated_desired_rate = 13.0;
    in.friction_estimate_rate = 17.0;
    in.supply = {4e6, -1e5};
    const double base = f4_reference(in);
    EXPECT_DOUBLE_EQ(base, (-0.3 - 500 - 13 + 17 + 7 * 4e6 + 11 * -1e5) / 2.0);
    in.load_force = 300.0;
    EXPECT_DOUBLE_EQ(f4_reference(in) - base, -5.0 * 200.0 / 2.0);
    in.coeffs.n1 = 0.0;
    EXPECT_THROW(f4_reference(in), NumericError);
}

TEST(Control, NominalExample) {
    const LlGains g;
    EXPECT_NEAR(control(1.0, 0.0, 0.0, 0.0, g, 0.0146), -68493.150684931505, 1e-8);
    EXPECT_EQ(control(0.0, 0.0, 0.0, 0.0, g, 0.0146), 0.0);
}

TEST(Control, UnitSensitivityToAuxState) {
    const LlGains g;
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 200; ++i) {
        const double e3 = 100 * u(rng), nn = 1e3 * u(rng), prev = 0.01 * u(rng), xi = 0.01 * u(rng);
        const double h = 1e-3;
        const double d = control(e3, nn, prev, xi + h, g, 0.0146) - control(e3, nn, prev, xi, g, 0.0146);
        EXPECT_NEAR(d, h, 1e-9);
    }
}

TEST(Control, VectorOverloadMatches) {
    ApproxNet net(3, 1.0, 0.1);
    net.weights = {1, 2, 3};
    const std::vector<double> chi{0.5, 0.25, 1.0};
    const LlGains g;
    EXPECT_DOUBLE_EQ(control(2.0, chi, net, 0.001, 0.002, g, 0.0146),
                     control(2.0, 4.0, 0.001, 0.002, g, 0.0146));
}

TEST(Residual, SolvedRootSatisfiesLoopEquation) {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (int i = 0; i < 500; ++i) {
        const double base = u(rng);
        const CurrentCommand c = close_residual_loop(base, 123.0, ResidualFeedback::Solved, -0.025, 0.025);
        EXPECT_NEAR(c.raw, base + c.residual, 1e-15);
        EXPECT_EQ(c.applied, saturate(base, -0.025, 0.025).applied);
        EXPECT_EQ(c.applied, saturate(c.raw, -0.025, 0.025).applied);
    }
    const CurrentCommand inside = close_residual_loop(0.01, 5.0, ResidualFeedback::Solved, -0.025, 0.025);
    EXPECT_EQ(inside.raw, 0.01);
    EXPECT_EQ(inside.residual, 0.0);
}

TEST(Residual, DelayedAndOff) {
    const CurrentCommand d = close_residual_loop(0.03, -0.002, ResidualFeedback::Delayed, -0.025, 0.025);
    EXPECT_DOUBLE_EQ(d.raw, 0.028);
    EXPECT_EQ(d.applied, 0.025);
    EXPECT_NEAR(d.residual, -0.003, 1e-15);
    const CurrentCommand o = close_residual_loop(-0.03, 1.0, ResidualFeedback::Off, -0.025, 0.025);
    EXPECT_EQ(o.raw, -0.03);
    EXPECT_EQ(o.applied, -0.025);
    EXPECT_DOUBLE_EQ(o.residual, 0.005);
}

TEST(AuxState, FrozenInsideBand) {
    const LlGains g;
    EXPECT_EQ(aux_update(0.0, 0.5, 100.0, g, 0.0146, 1e-3), 0.0);
    EXPECT_EQ(aux_update(g.aux_deadzone, 0.5, 100.0, g, 0.0146, 1e-3), g.aux_deadzone);
    EXPECT_EQ(aux_update(-g.aux_deadzone, 0.5, 100.0, g, 0.0146, 1e-3), -g.aux_deadzone);
}

TEST(AuxState, PureDecayWithoutSaturation) {
    const LlGains g;
    const double xi = 0.5, dt = 1e-3;
    EXPECT_DOUBLE_EQ(aux_update(xi, 0.0, 0.0, g, 0.0146, dt), xi * (1 - g.k_aux * dt));
    EXPECT_DOUBLE_EQ(aux_update(-xi, 0.0, 0.0, g, 0.0146, dt), -xi * (1 - g.k_aux * dt));
}

TEST(AuxState, StopsOnBandEdge) {
    const LlGains g;
    // a huge coupling term drives the step across zero
    EXPECT_EQ(aux_update(0.002, 0.0, 1e6, g, 0.0146, 1e-3), g.aux_deadzone);
    EXPECT_EQ(aux_update(-0.002, 0.0, 1e6, g, 0.0146, 1e-3), -g.aux_deadzone);
    // decay that lands inside the band also stops on the edge
    EXPECT_EQ(aux_update(0.0010001, 0.0, 0.0, g, 0.0146, 0.1), g.aux_deadzone);
}

TEST(AuxState, NeverCrossesZero) {
    const LlGains g;
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 2000; ++i) {
        const double xi = 0.05 * u(rng);
        const double next = aux_update(xi, 0.01 * u(rng), 1e4 * u(rng), g, 0.0146, 1e-3);
        if (std::abs(xi) > g.aux_deadzone) {
            EXPECT_EQ(sgn(next), sgn(xi));
            EXPECT_GE(std::abs(next), g.aux_deadzone);
        } else {
            EXPECT_EQ(next, xi);
        }
    }
}

TEST(AuxState, Rearm) {
    EXPECT_EQ(rearm_aux(0.0, 0.01, 1e-3), 2e-3);
    EXPECT_EQ(rearm_aux(0.0005, -0.01, 1e-3), -2e-3);
    EXPECT_EQ(rearm_aux(0.0, 0.0, 1e-3), 0.0);
    EXPECT_EQ(rearm_aux(0.5, -0.01, 1e-3), 0.5);
}

TEST(Bounds, SpoolBound) {
    EXPECT_DOUBLE_EQ(spool_bound(0.0, 1e-4, 0.0015, 0.0146, 0.025), 1e-4 + 0.0146 * 0.025);
    EXPECT_DOUBLE_EQ(spool_bound(1.0, 0.0, 0.0015, 0.0146, 0.025), 0.0146 * 0.025);
    EXPECT_LT(spool_bound(0.01, 1e-4, 0.0015, 0.0146, 0.025), spool_bound(0.0, 1e-4, 0.0015, 0.0146, 0.025));
}

TEST(Bounds, GainSplitSumsToTotal) {
    LlGains g;
    g.penalty_force = 2.5;
    const std::vector<WeightBlock> blocks{{0.2, 4.0}, {0.2, 9.0}};
    for (const auto& split : {std::array<double, 3>{1, 1, 1}, std::array<double, 3>{0.2, 0.5, 0.3},
                              std::array<double, 3>{5, 1, 1}}) {
        const UubBounds b = uub_bounds(g, 0.0015, 0.0146, 0.025, 0.0, blocks, 10.0, split);
        EXPECT_NEAR(b.k30 + b.k31 + b.k32, g.k_force * g.penalty_force, 1e-9);
        EXPECT_GT(b.alpha1, 0.5 * 0.2 * 13.0);
        EXPECT_GT(b.force_error_radius(), 0.0);
    }
    EXPECT_THROW(uub_bounds(g, 0.0015, 0.0146, 0.025, 0.0, blocks, 10.0, {1, 0, 1}), ConfigError);
}

TEST(Bounds, AlphaClosedForm) {
    const LlGains g;
    const UubBounds b = uub_bounds(g, 0.002, 0.01, 0.02, 0.0, {{0.5, 2.0}}, 3.0, {0.5, 0.25, 0.25});
    const double rho = 0.01 * 0.02;
    const double vs = (0.01 * 0.02 + rho) / 0.002;
    EXPECT_DOUBLE_EQ(b.spool_bound, rho);
    EXPECT_DOUBLE_EQ(b.spool_rate_bound, vs);
    EXPECT_DOUBLE_EQ(b.alpha1, 0.5 + std::pow(0.002 * vs, 2) / (4 * 250) + 9.0 / (4 * 250));
}

TEST(Bounds, PositionBoundsShrinkWithGain) {
    const LlGains ll;
    LlGains stiff = ll;
    stiff.k_force *= 4;
    const HlGains hl;
    const UubBounds b = uub_bounds(ll, 0.0015, 0.0146, 0.025, 0.0, {{0.2, 1.0}}, 1.0);
    const PositionBounds p1 = position_bounds(b, ll, hl, 0.1, 1.0);
    const PositionBounds p2 = position_bounds(b, stiff, hl, 0.1, 1.0);
    EXPECT_DOUBLE_EQ(p2.angle_error, 0.5 * p1.angle_error);
    EXPECT_DOUBLE_EQ(p2.virtual_error, 0.5 * p1.virtual_error);
}

TEST(Validation, AuxGainBelowHalfRejected) {
    LlGains g;
    EXPECT_TRUE(validate(g).empty());
    g.k_aux = 0.5;
    const auto issues = validate(g);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues.front().path, "lowlevel.k_aux");
}
