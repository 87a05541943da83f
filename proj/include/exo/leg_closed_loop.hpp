#pragma once

// Position loop in isolation: the cylinder delivers the desired force
// exactly, so only the shank dynamics and the estimate dynamics remain.
// Used to check the Lyapunov properties of the backstepping design.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "exo/highlevel_controller.hpp"
#include "exo/plant_model.hpp"
#include "exo/sim_engine.hpp"

namespace exo {

enum class ForceTiming {
    Continuous,  // force and adaptation re-evaluated at every RK4 stage
    Sampled,     // force held over dt, estimates advanced by explicit Euler
};

struct LegLoopConfig {
    double dt = 0.001;
    double duration = 5.0;
    int substeps = 1;  // RK4 steps per sample, Continuous only
    ReferenceConfig reference;
    PlantParams plant;
    HlGains gains;
    HlEstimates initial_estimates;  // defaults to the true parameters when use_truth is set
    bool use_truth = true;
    bool adapt = false;
    ForceTiming timing = ForceTiming::Continuous;
    double initial_angle = 0.0;
    double initial_velocity = 0.0;
};

struct LegSample {
    double t = 0;
    double angle = 0;
    double velocity = 0;
    TrackingErrors errors;
    double tau_hm = 0;
    double force = 0;
    double v_position = 0;  // V_H,1 with the true inertia
    double v_adaptive = 0;  // V_H,3 with the true parameters
    double decay = 0;       // k1 rho1 e1^2 + k2 rho2 e2^2
    HlEstimates estimates;
};

namespace detail {

struct LegState {
    double angle = 0;
    double velocity = 0;
    HlEstimates est;
};

struct LegEval {
    double acceleration = 0;
    HlEstimates rates;
    double force = 0;
    double tau_hm = 0;
    TrackingErrors errors;
};

inline LegEval leg_eval(const LegState& y, double t, const LegLoopConfig& c, const double* held_force) {
    const PlantParams& p = c.plant;
    const ReferencePoint ref = reference(t, c.reference);
    const double arm = moment_arm(y.angle, p);
    LegEval out;
    out.errors = compute_errors(y.angle, y.velocity, ref, c.gains.k_virtual);
    out.tau_hm = interaction_torque(y.angle - ref.angle, y.velocity - ref.velocity,
                                    p.interaction_stiffness, p.interaction_damping);
    out.force = held_force ? *held_force
                           : desired_force(out.errors, y.angle, y.velocity, y.est, out.tau_hm,
                                           c.gains, arm, leg_constants(p));
    const double friction = friction_force(y.velocity, p.coulomb_friction, p.viscous_friction);
    out.acceleration = (arm * (out.force + friction) -
                        p.shank_mass * p.gravity * p.com_distance * std::sin(y.angle) + out.tau_hm) /
                       p.shank_inertia;
    if (c.adapt && !held_force) {
        out.rates = estimate_rates(out.errors, y.angle, y.velocity, c.gains, arm, leg_constants(p));
    }
    return out;
}

inline LegState leg_advance(const LegState& y, const LegEval& d, double h) {
    LegState out = y;
    out.angle += h * y.velocity;
    out.velocity += h * d.acceleration;
    out.est += d.rates.scaled(h);
    return out;
}

}  // namespace detail

inline HlEstimates true_estimates(const PlantParams& p) noexcept {
    return {p.shank_inertia, p.shank_mass, p.coulomb_friction, p.viscous_friction};
}

/// Samples at t = k dt for k = 0 .. ceil(duration / dt).
inline std::vector<LegSample> run_leg_loop(const LegLoopConfig& c) {
    using detail::LegEval;
    using detail::LegState;
    LegState y{c.initial_angle, c.initial_velocity,
               c.use_truth ? true_estimates(c.plant) : c.initial_estimates};
    const std::size_t n = step_count(c.duration, c.dt);
    std::vector<LegSample> out;
    out.reserve(n + 1);

    auto sample = [&](double t) {
        const LegEval e = detail::leg_eval(y, t, c, nullptr);
        LegSample s;
        s.t = t;
        s.angle = y.angle;
        s.velocity = y.velocity;
        s.errors = e.errors;
        s.tau_hm = e.tau_hm;
        s.force = e.force;
        s.v_position = lyapunov_position(e.errors, c.gains, c.plant.shank_inertia);
        s.v_adaptive = lyapunov_adaptive(e.errors, y.est, c.gains, c.plant);
        s.decay = lyapunov_decay(e.errors, c.gains);
        s.estimates = y.est;
        out.push_back(s);
        return e;
    };

    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * c.dt;
        const LegEval now = sample(t);
        if (k == n) break;
        if (c.timing == ForceTiming::Sampled) {
            const double f = now.force;
            HlEstimates rates;
            if (c.adapt) {
                rates = estimate_rates(now.errors, y.angle, y.velocity, c.gains,
                                       moment_arm(y.angle, c.plant), leg_constants(c.plant));
            }
            const double h = c.dt;
            const LegEval k1 = detail::leg_eval(y, t, c, &f);
            const LegEval k2 = detail::leg_eval(detail::leg_advance(y, k1, h / 2), t + h / 2, c, &f);
            const LegEval k3 = detail::leg_eval(detail::leg_advance(y, k2, h / 2), t + h / 2, c, &f);
            const LegEval k4 = detail::leg_eval(detail::leg_advance(y, k3, h), t + h, c, &f);
            LegState next = y;
            next.angle = y.angle + h / 6 * (y.velocity + 2 * (y.velocity + h / 2 * k1.acceleration) +
                                            2 * (y.velocity + h / 2 * k2.acceleration) +
                                            (y.velocity + h * k3.acceleration));
            next.velocity = y.velocity + h / 6 * (k1.acceleration + 2 * k2.acceleration +
                                                  2 * k3.acceleration + k4.acceleration);
            next.est += rates.scaled(h);
            y = next;
        } else {
            const int m = std::max(1, c.substeps);
            const double h = c.dt / m;
            for (int i = 0; i < m; ++i) {
                const double ts = t + i * h;
                const LegEval k1 = detail::leg_eval(y, ts, c, nullptr);
                const LegState y1 = detail::leg_advance(y, k1, h / 2);
                const LegEval k2 = detail::leg_eval(y1, ts + h / 2, c, nullptr);
                const LegState y2 = detail::leg_advance(y, k2, h / 2);
                const LegEval k3 = detail::leg_eval(y2, ts + h / 2, c, nullptr);
                const LegState y3 = detail::leg_advance(y, k3, h);
                const LegEval k4 = detail::leg_eval(y3, ts + h, c, nullptr);
                LegState next = y;
                next.angle += h / 6 * (y.velocity + 2 * y1.velocity + 2 * y2.velocity + y3.velocity);
                next.velocity += h / 6 * (k1.acceleration + 2 * k2.acceleration + 2 * k3.acceleration +
                                          k4.acceleration);
                next.est += k1.rates.scaled(h / 6);
                next.est += k2.rates.scaled(h / 3);
                next.est += k3.rates.scaled(h / 3);
                next.est += k4.rates.scaled(h / 6);
                y = next;
            }
        }
    }
    return out;
}

}  // namespace exo
