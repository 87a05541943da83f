#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "exo/highlevel_controller.hpp"
#include "exo/leg_closed_loop.hpp"

using namespace exo;

TEST(Errors, PerfectTracking) {
    const ReferencePoint r{0.01, 0.2, -1.0};
    const TrackingErrors e = compute_errors(0.01, 0.2, r, 500);
    EXPECT_EQ(e.angle_error, 0.0);
    EXPECT_EQ(e.virtual_error, 0.0);
}

TEST(Errors, VirtualErrorFromAngleError) {
    const ReferencePoint r{0.0, 0.3, 0.0};
    const TrackingErrors e = compute_errors(0.01, 0.3, r, 500);
    EXPECT_DOUBLE_EQ(e.virtual_error, 5.0);
}

TEST(Errors, ReferenceAtOrigin) {
    const ReferencePoint r = reference(0.0, ReferenceConfig{});
    EXPECT_EQ(r.angle, 0.0);
    EXPECT_DOUBLE_EQ(r.velocity, 0.05 * std::numbers::pi);
    EXPECT_EQ(r.acceleration, 0.0);
}

TEST(Errors, DefinitionalIdentity) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 500; ++i) {
        const ReferencePoint r{0.03 * u(rng), u(rng), 10 * u(rng)};
        const double phi = 0.05 * u(rng), dphi = u(rng);
        const TrackingErrors e = compute_errors(phi, dphi, r, 500);
        EXPECT_NEAR(e.virtual_error, 500 * e.angle_error + (dphi - r.velocity), 1e-12);
        EXPECT_DOUBLE_EQ(e.virtual_control_rate, -500 * (dphi - r.velocity) + r.acceleration);
    }
}

TEST(Friction, Estimates) {
    EXPECT_EQ(estimated_friction(0.0, {1, 2, 8, 5000}), 0.0);
    EXPECT_DOUBLE_EQ(estimated_friction(0.5, {0, 0, 4, 2500}), -1254.0);
    EXPECT_EQ(estimated_friction(0.3, {0, 0, 8, 5000}), friction_force(0.3, 8, 5000));
}

TEST(DesiredForce, VanishesAtRest) {
    const HlGains g;
    const TrackingErrors e{};
    EXPECT_EQ(desired_force(e, 0.0, 0.0, {6.3, 70, 8, 5000}, 0.0, g, 0.11, {}), 0.0);
}

TEST(DesiredForce, SingularArmThrows) {
    EXPECT_THROW(desired_force({}, 0, 0, {}, 0, HlGains{}, 0.0, {}), GeometryError);
}

TEST(DesiredForce, LinearInVirtualError) {
    const HlGains g;
    const double arm = 0.11;
    TrackingErrors e{0.001, 0.2, 0.1, 0.5};
    const HlEstimates est{3, 40, 5, 1000};
    const double f0 = desired_force(e, 0.01, 0.1, est, 1.0, g, arm, {});
    e.virtual_error += 0.3;
    const double f1 = desired_force(e, 0.01, 0.1, est, 1.0, g, arm, {});
    EXPECT_NEAR(f0 - f1, g.k_velocity * 0.3 / arm, 1e-9);
}

TEST(DesiredForce, CrossTermSignVariant) {
    HlGains plus, minus;
    minus.cross_term = CrossTermSign::Minus;
    const TrackingErrors e{0.002, 0, 0, 0};
    const double fp = desired_force(e, 0, 0, {}, 0, plus, 0.1, {});
    const double fm = desired_force(e, 0, 0, {}, 0, minus, 0.1, {});
    EXPECT_DOUBLE_EQ(fp, -0.02);
    EXPECT_DOUBLE_EQ(fm, 0.02);
}

TEST(DesiredForce, ExactForceYieldsLyapunovRate) {
    // V1' evaluated along the closed loop equals -k1 e1^2 - k2 e2^2 with true parameters
    const PlantParams p;
    const HlGains g;
    const HlEstimates truth = true_estimates(p);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 300; ++i) {
        const ReferencePoint r{0.025 * u(rng), 0.15 * u(rng), u(rng)};
        const double phi = 0.05 * u(rng);
        const double dphi = 0.5 * u(rng) + (i % 10 == 0 ? 0 : 0.01);
        const TrackingErrors e = compute_errors(phi, dphi, r, g.k_virtual);
        const double tau = interaction_torque(phi - r.angle, dphi - r.velocity, p.interaction_stiffness,
                                              p.interaction_damping);
        const double arm = moment_arm(phi, p);
        const double f = desired_force(e, phi, dphi, truth, tau, g, arm, leg_constants(p));
        const double ddphi = (arm * (f + friction_force(dphi, p.coulomb_friction, p.viscous_friction)) -
                              p.shank_mass * p.gravity * p.com_distance * std::sin(phi) + tau) /
                             p.shank_inertia;
        const double de1 = dphi - r.velocity;
        const double de2 = ddphi - e.virtual_control_rate;
        const double vdot = g.penalty_e1 * e.angle_error * de1 + g.penalty_e2 * p.shank_inertia * e.virtual_error * de2;
        const double expect = -lyapunov_decay(e, g);
        const double scale = std::abs(expect) + g.penalty_e1 * std::abs(e.angle_error * de1) + 1e-300;
        EXPECT_LT(std::abs(vdot - expect) / scale, 1e-10);
    }
}

TEST(Adaptation, MassInertiaIncrements) {
    const HlGains g;
    TrackingErrors e{0.0, 0.0, 0.0, 1.0};
    auto inc = adapt_mass_inertia(e, 0.3, g, {}, 1e-3);
    EXPECT_EQ(inc.inertia, 0.0);
    EXPECT_EQ(inc.mass, 0.0);

    e.virtual_error = 2.0;
    inc = adapt_mass_inertia(e, 0.0, g, {}, 1e-3);
    EXPECT_EQ(inc.mass, 0.0);

    e.virtual_error = 1.0;
    inc = adapt_mass_inertia(e, 0.0, g, {}, 1e-3);
    EXPECT_NEAR(inc.inertia, -1e-6, 1e-20);
}

TEST(Adaptation, FrictionIncrements) {
    const HlGains g;
    TrackingErrors e{0, 1.0, 0, 0};
    auto inc = adapt_friction(e, 0.0, g, 0.11, 1e-3);
    EXPECT_EQ(inc.coulomb, 0.0);
    EXPECT_EQ(inc.viscous, 0.0);
    e.virtual_error = 0.0;
    inc = adapt_friction(e, 0.4, g, 0.11, 1e-3);
    EXPECT_EQ(inc.coulomb, 0.0);
    EXPECT_EQ(inc.viscous, 0.0);

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 200; ++i) {
        const double e2 = u(rng), v = u(rng);
        const auto a = adapt_friction({0, e2, 0, 0}, v, g, 0.11, 1e-3);
        const auto b = adapt_friction({0, -e2, 0, 0}, -v, g, 0.11, 1e-3);
        const auto c = adapt_friction({0, -e2, 0, 0}, v, g, 0.11, 1e-3);
        EXPECT_DOUBLE_EQ(a.viscous, b.viscous);
        EXPECT_DOUBLE_EQ(a.coulomb, b.coulomb);
        EXPECT_DOUBLE_EQ(a.viscous, -c.viscous);
        EXPECT_DOUBLE_EQ(a.coulomb, -c.coulomb);
    }
}

TEST(Adaptation, RatesAgreeWithIncrements) {
    const HlGains g;
    const TrackingErrors e{0.001, 0.3, 0.2, -0.7};
    const HlEstimates r = estimate_rates(e, 0.02, -0.4, g, 0.11, {});
    const auto mi = adapt_mass_inertia(e, 0.02, g, {}, 1e-3);
    const auto fr = adapt_friction(e, -0.4, g, 0.11, 1e-3);
    EXPECT_DOUBLE_EQ(r.inertia * 1e-3, mi.inertia);
    EXPECT_DOUBLE_EQ(r.mass * 1e-3, mi.mass);
    EXPECT_DOUBLE_EQ(r.coulomb * 1e-3, fr.coulomb);
    EXPECT_DOUBLE_EQ(r.viscous * 1e-3, fr.viscous);
}

TEST(Adaptation, StallsWhenVirtualErrorIsZero) {
    const HlGains g;
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 100; ++i) {
        const TrackingErrors e{u(rng), 0.0, u(rng), u(rng)};
        const HlEstimates r = estimate_rates(e, u(rng), u(rng), g, 0.11, {});
        EXPECT_EQ(r.inertia, 0.0);
        EXPECT_EQ(r.mass, 0.0);
        EXPECT_EQ(r.coulomb, 0.0);
        EXPECT_EQ(r.viscous, 0.0);
    }
}

TEST(Watchdog, DivergedEstimateThrows) {
    EXPECT_NO_THROW(check_estimates({1, 2, 3, 4}));
    EXPECT_THROW(check_estimates({2e9, 0, 0, 0}), NumericError);
    EXPECT_THROW(check_estimates({0, NAN, 0, 0}), NumericError);
}

TEST(Validation, GainsMustBePositive) {
    HlGains g;
    EXPECT_TRUE(validate(g).empty());
    g.adapt_mass = 0;
    const auto issues = validate(g);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues.front().path, "highlevel.adapt_mass");
}

TEST(LegLoop, NominalStrictDecrease) {
    LegLoopConfig c;
    c.duration = 0.5;
    const auto s = run_leg_loop(c);
    int checked = 0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        if (s[k].v_position < 1e-12) continue;
        ++checked;
        EXPECT_LT(s[k + 1].v_position, s[k].v_position) << "t = " << s[k].t;
    }
    EXPECT_GT(checked, 10);
}

TEST(LegLoop, ConvergesBelowTolerance) {
    LegLoopConfig c;
    c.duration = 2.0;
    const auto s = run_leg_loop(c);
    for (std::size_t k = s.size() - 1000; k < s.size(); ++k) {
        EXPECT_LT(std::abs(s[k].errors.angle_error), 1e-4);
        EXPECT_LT(std::abs(s[k].errors.virtual_error), 1e-4);
    }
}

TEST(LegLoop, DampingIdentityWithMatchedGains) {
    LegLoopConfig c;
    c.duration = 0.3;
    c.use_truth = false;
    c.adapt = true;
    const auto s = run_leg_loop(c);
    for (const LegSample& x : s) {
        const double scale = std::abs(c.plant.interaction_damping * x.errors.virtual_error) + std::abs(x.tau_hm);
        EXPECT_LE(std::abs(c.plant.interaction_damping * x.errors.virtual_error - x.tau_hm), 8 * 2.3e-16 * scale + 1e-300);
    }
}
