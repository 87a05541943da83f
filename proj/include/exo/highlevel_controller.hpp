#pragma once

// Backstepping position loop for the shank. Produces the cylinder force the
// hydraulic loop has to track and adapts inertia, mass and both friction
// coefficients online.

#include <cmath>

#include "exo/errors.hpp"
#include "exo/math.hpp"
#include "exo/plant_model.hpp"

namespace exo {

/// Sign of the e1 cross term in the desired force. `Plus` cancels the
/// cross term of the Lyapunov derivative; `Minus` is the alternative printed
/// form, kept for comparison runs.
enum class CrossTermSign { Plus, Minus };

struct HlGains {
    double k_virtual = 500.0;   // e1 gain of the virtual control, 1/s
    double k_velocity = 200.0;  // e2 feedback gain
    double penalty_e1 = 1.0;
    double penalty_e2 = 1.0;
    double adapt_inertia = 1000.0;
    double adapt_mass = 0.01;
    double adapt_coulomb = 0.007;
    double adapt_viscous = 0.0005;
    CrossTermSign cross_term = CrossTermSign::Plus;

    [[nodiscard]] double penalty_ratio() const noexcept { return penalty_e1 / penalty_e2; }
};

struct HlEstimates {
    double inertia = 0.0;   // kg m^2
    double mass = 0.0;      // kg
    double coulomb = 0.0;   // N
    double viscous = 0.0;   // N s/m

    HlEstimates& operator+=(const HlEstimates& o) noexcept {
        inertia += o.inertia;
        mass += o.mass;
        coulomb += o.coulomb;
        viscous += o.viscous;
        return *this;
    }
    [[nodiscard]] HlEstimates scaled(double k) const noexcept {
        return {inertia * k, mass * k, coulomb * k, viscous * k};
    }
};

struct TrackingErrors {
    double angle_error = 0.0;            // e1, rad
    double virtual_error = 0.0;          // e2, rad/s
    double virtual_control = 0.0;        // v1, rad/s
    double virtual_control_rate = 0.0;   // dv1/dt, rad/s^2
};

/// Parameters of the leg that the controller treats as known.
struct LegConstants {
    double gravity = 9.81;
    double com_distance = 0.3;
};

inline LegConstants leg_constants(const PlantParams& p) noexcept {
    return {p.gravity, p.com_distance};
}

constexpr TrackingErrors compute_errors(double angle, double velocity, const ReferencePoint& ref,
                                        double k_virtual) noexcept {
    TrackingErrors e;
    e.angle_error = angle - ref.angle;
    e.virtual_control = -k_virtual * e.angle_error + ref.velocity;
    e.virtual_error = velocity - e.virtual_control;
    e.virtual_control_rate = -k_virtual * (velocity - ref.velocity) + ref.acceleration;
    return e;
}

constexpr double estimated_friction(double velocity, const HlEstimates& est) noexcept {
    return friction_force(velocity, est.coulomb, est.viscous);
}

/// Desired cylinder force.
inline double desired_force(const TrackingErrors& err, double angle, double velocity,
                            const HlEstimates& est, double tau_hm, const HlGains& gains,
                            double arm, const LegConstants& leg) {
    if (arm == 0.0) throw GeometryError("singular moment arm: N = 0");
    const double cross = (gains.cross_term == CrossTermSign::Plus ? 1.0 : -1.0) *
                         gains.penalty_ratio() * err.angle_error;
    const double bracket = gains.k_velocity * err.virtual_error + cross +
                           arm * estimated_friction(velocity, est) + tau_hm -
                           est.mass * leg.gravity * leg.com_distance * std::sin(angle) -
                           est.inertia * err.virtual_control_rate;
    return -bracket / arm;
}

/// Continuous-time rates of all four estimates.
inline HlEstimates estimate_rates(const TrackingErrors& err, double angle, double velocity,
                                  const HlGains& gains, double arm, const LegConstants& leg) noexcept {
    const double w = gains.penalty_e2 * err.virtual_error;
    HlEstimates r;
    r.inertia = -w * err.virtual_control_rate / gains.adapt_inertia;
    r.mass = -w * leg.gravity * leg.com_distance * std::sin(angle) / gains.adapt_mass;
    r.coulomb = -w * arm * sgn(velocity) / gains.adapt_coulomb;
    r.viscous = -w * arm * velocity / gains.adapt_viscous;
    return r;
}

struct InertiaMassIncrement {
    double inertia = 0.0;
    double mass = 0.0;
};

struct FrictionIncrement {
    double coulomb = 0.0;
    double viscous = 0.0;
};

/// Explicit-Euler increment of the inertia and mass estimates over dt.
inline InertiaMassIncrement adapt_mass_inertia(const TrackingErrors& err, double angle,
                                               const HlGains& gains, const LegConstants& leg,
                                               double dt) noexcept {
    const double w = gains.penalty_e2 * err.virtual_error;
    return {dt * (-w * err.virtual_control_rate / gains.adapt_inertia),
            dt * (-w * leg.gravity * leg.com_distance * std::sin(angle) / gains.adapt_mass)};
}

/// Explicit-Euler increment of the Coulomb and viscous estimates over dt.
constexpr FrictionIncrement adapt_friction(const TrackingErrors& err, double velocity,
                                           const HlGains& gains, double arm, double dt) noexcept {
    const double w = gains.penalty_e2 * arm * err.virtual_error;
    return {dt * (-w * sgn(velocity) / gains.adapt_coulomb),
            dt * (-w * velocity / gains.adapt_viscous)};
}

inline constexpr double kEstimateDivergenceLimit = 1e9;

/// Aborts the run once any estimate is non-finite or beyond 1e9 in magnitude.
inline void check_estimates(const HlEstimates& est) {
    for (const double v : {est.inertia, est.mass, est.coulomb, est.viscous}) {
        if (!std::isfinite(v) || std::abs(v) > kEstimateDivergenceLimit) {
            throw NumericError("high-level estimate diverged");
        }
    }
}

/// Lyapunov function of the position loop, evaluated with the true inertia.
constexpr double lyapunov_position(const TrackingErrors& err, const HlGains& gains,
                                   double true_inertia) noexcept {
    return 0.5 * gains.penalty_e1 * square(err.angle_error) +
           0.5 * gains.penalty_e2 * true_inertia * square(err.virtual_error);
}

/// Position Lyapunov function augmented with the estimation errors. Needs the
/// true plant parameters, so it is only meaningful in verification runs.
constexpr double lyapunov_adaptive(const TrackingErrors& err, const HlEstimates& est,
                                   const HlGains& gains, const PlantParams& truth) noexcept {
    return lyapunov_position(err, gains, truth.shank_inertia) +
           0.5 * gains.adapt_inertia * square(truth.shank_inertia - est.inertia) +
           0.5 * gains.adapt_mass * square(truth.shank_mass - est.mass) +
           0.5 * gains.adapt_coulomb * square(truth.coulomb_friction - est.coulomb) +
           0.5 * gains.adapt_viscous * square(truth.viscous_friction - est.viscous);
}

/// Guaranteed decay rate k1 rho1 e1^2 + k2 rho2 e2^2.
constexpr double lyapunov_decay(const TrackingErrors& err, const HlGains& gains) noexcept {
    return gains.k_virtual * gains.penalty_e1 * square(err.angle_error) +
           gains.k_velocity * gains.penalty_e2 * square(err.virtual_error);
}

inline std::vector<Issue> validate(const HlGains& g, const std::string& prefix = "highlevel") {
    std::vector<Issue> out;
    auto need = [&](bool ok, const char* key) {
        if (!ok) out.push_back({prefix + "." + key, "must be > 0"});
    };
    need(g.k_virtual > 0, "k_virtual");
    need(g.k_velocity > 0, "k_velocity");
    need(g.penalty_e1 > 0, "penalty_e1");
    need(g.penalty_e2 > 0, "penalty_e2");
    need(g.adapt_inertia > 0, "adapt_inertia");
    need(g.adapt_mass > 0, "adapt_mass");
    need(g.adapt_coulomb > 0, "adapt_coulomb");
    need(g.adapt_viscous > 0, "adapt_viscous");
    return out;
}

}  // namespace exo
