#pragma once

// Force loop for the hydraulic actuator: servo current from the force error,
// the network estimate of the lumped nonlinearity f4, the previous saturation
// residual and the auxiliary anti-saturation state xi.

#include <cmath>
#include <string>
#include <vector>

#include "exo/errors.hpp"
#include "exo/function_approx.hpp"
#include "exo/highlevel_controller.hpp"
#include "exo/math.hpp"
#include "exo/plant_model.hpp"

namespace exo {

/// How the saturation residual re-enters the current command.
enum class ResidualFeedback {
    Solved,   // u = base + delta(u) solved exactly: applied = sat(base), delta = (applied - base) / 2
    Delayed,  // delta of the previous step added to this step's command
    Off,      // no residual term
};

inline const char* to_string(ResidualFeedback r) noexcept {
    switch (r) {
        case ResidualFeedback::Solved: return "Solved";
        case ResidualFeedback::Delayed: return "Delayed";
        case ResidualFeedback::Off: return "Off";
    }
    return "?";
}

struct LlGains {
    double k_force = 1000.0;      // k3
    double penalty_force = 1.0;   // rho3
    double k_aux = 1.0;           // decay gain of xi, must exceed 1/2
    double aux_deadzone = 1e-3;   // A, xi is frozen while |xi| <= this
    double smoothing_halfwidth = 0.001;  // rad/s, band of the friction-rate approximation
    ResidualFeedback residual_feedback = ResidualFeedback::Solved;
};

struct LlState {
    double xi = 0.0;                      // A
    double prev_compensated_force = 0.0;  // N, previous F_L,d + F_f estimate
    bool has_prev = false;
    double prev_residual = 0.0;           // A, saturation residual of the last step
};

/// Approximate time derivative of the estimated friction force. Inside the
/// band |phi'| < eps0 the sgn jump is replaced by a finite slope.
constexpr double friction_derivative_approx(double velocity, double acceleration,
                                            const HlEstimates& est, double viscous_rate,
                                            double eps0) noexcept {
    if (velocity >= eps0) return -est.coulomb - est.viscous * acceleration - viscous_rate * velocity;
    if (velocity >= -eps0) return (-est.coulomb - est.viscous * eps0) / eps0;
    return est.coulomb - est.viscous * acceleration - viscous_rate * velocity;
}

constexpr double force_error(double load_force, double desired) noexcept {
    return load_force - desired;
}

/// Everything f4 depends on at one instant.
struct F4Inputs {
    HydraulicCoeffs coeffs;
    double piston_rate = 0.0;              // m/s
    double load_force = 0.0;               // N
    double compensated_desired_rate = 0.0; // d/dt (F_L,d + F_f estimate), N/s
    double friction_estimate_rate = 0.0;   // d/dt F_f estimate, N/s
    SupplyPressure supply;
};

/// Lumped nonlinearity of the force-error dynamics, e3' = n1 (x_v + f4).
/// Only used as a reference signal for the network and in tests.
inline double f4_reference(const F4Inputs& in) {
    const HydraulicCoeffs& c = in.coeffs;
    if (c.n1 == 0.0) throw NumericError("singular hydraulic coefficient: n1 = 0");
    return (-c.n2 * in.piston_rate - c.n3 * in.load_force - in.compensated_desired_rate +
            in.friction_estimate_rate + c.n4 * in.supply.pressure + c.n5 * in.supply.rate) /
           c.n1;
}

/// Raw servo current before saturation.
constexpr double control(double force_err, double network_output, double prev_residual,
                         double xi, const LlGains& gains, double valve_gain) noexcept {
    return -(gains.k_force * force_err + network_output) / valve_gain + prev_residual + xi;
}

inline double control(double force_err, const std::vector<double>& chi, const ApproxNet& net,
                      double prev_residual, double xi, const LlGains& gains, double valve_gain) {
    return control(force_err, estimate(chi, net), prev_residual, xi, gains, valve_gain);
}

struct CurrentCommand {
    double raw = 0.0;       // A, u before the clamp
    double applied = 0.0;   // A
    double residual = 0.0;  // A, applied - raw
};

/// Command for base = -(k3 e3 + W^T chi)/k_s + xi under the chosen residual
/// treatment. `prev_residual` is only read in Delayed mode.
inline CurrentCommand close_residual_loop(double base, double prev_residual, ResidualFeedback mode,
                                          double lo, double hi) noexcept {
    CurrentCommand c;
    switch (mode) {
        case ResidualFeedback::Solved: {
            // u = base + sat(u) - u has the unique root u = (base + sat(base)) / 2
            const double applied = saturate(base, lo, hi).applied;
            c.raw = 0.5 * (base + applied);
            break;
        }
        case ResidualFeedback::Delayed: c.raw = base + prev_residual; break;
        case ResidualFeedback::Off: c.raw = base; break;
    }
    const SaturatedInput s = saturate(c.raw, lo, hi);
    c.applied = s.applied;
    c.residual = s.residual;
    return c;
}

/// One explicit-Euler step of the auxiliary system. Frozen while |xi| <= mu.
/// A step that would jump into the frozen band, or across zero, stops on the
/// band edge sgn(xi) mu, where the continuous solution freezes.
inline double aux_update(double xi, double residual, double force_err, const LlGains& gains,
                         double valve_gain, double dt) noexcept {
    const double mu = gains.aux_deadzone;
    if (std::abs(xi) <= mu) return xi;
    const double coupling = std::abs(gains.penalty_force * force_err * valve_gain * (residual + xi));
    const double rate = -gains.k_aux * xi - (coupling + 0.5 * square(residual)) / xi - residual;
    const double next = xi + dt * rate;
    if (sgn(next) != sgn(xi) || std::abs(next) < mu) return sgn(xi) * mu;
    return next;
}

/// Re-arms the auxiliary state when saturation occurs while it is frozen.
constexpr double rearm_aux(double xi, double residual, double mu) noexcept {
    if (std::abs(xi) <= mu && residual != 0.0) return sgn(residual) * 2.0 * mu;
    return xi;
}

// ---------------------------------------------------------------------------
// Ultimate-bound constants of the force loop
// ---------------------------------------------------------------------------

/// Upper bound of |x_v(t)| under |u| <= current_limit.
inline double spool_bound(double t, double spool0, double time_constant, double valve_gain,
                          double current_limit) noexcept {
    return std::abs(spool0) * std::exp(-t / time_constant) + valve_gain * current_limit;
}

struct UubBounds {
    double k30 = 0.0;
    double k31 = 0.0;
    double k32 = 0.0;
    double alpha1 = 0.0;
    double spool_rate_bound = 0.0;  // varsigma
    double spool_bound = 0.0;       // rho

    /// Radius of the ball that |e3| ultimately enters.
    [[nodiscard]] double force_error_radius() const { return std::sqrt(alpha1 / k30); }
    /// Radius for the weight-error block with leakage sigma.
    [[nodiscard]] double weight_error_radius(double sigma) const {
        return std::sqrt(2.0 * alpha1 / sigma);
    }
};

struct WeightBlock {
    double leakage = 0.0;             // sigma_i
    double ideal_norm_squared = 0.0;  // |W_i|^2
};

/// Composite bound constant alpha1. `split` gives the shares of k3 rho3
/// assigned to k30, k31 and k32 (must be positive and sum to one).
inline UubBounds uub_bounds(const LlGains& gains, double time_constant, double valve_gain,
                            double current_limit, double spool0,
                            const std::vector<WeightBlock>& blocks, double approx_error_bound,
                            std::array<double, 3> split = {1.0 / 3, 1.0 / 3, 1.0 / 3}) {
    const double total = split[0] + split[1] + split[2];
    if (!(split[0] > 0 && split[1] > 0 && split[2] > 0)) {
        throw ConfigError("lowlevel", "k30/k31/k32 split must be positive");
    }
    const double k_rho3 = gains.k_force * gains.penalty_force;
    UubBounds b;
    b.k30 = k_rho3 * split[0] / total;
    b.k31 = k_rho3 * split[1] / total;
    b.k32 = k_rho3 - b.k30 - b.k31;
    b.spool_bound = std::abs(spool0) + valve_gain * current_limit;
    b.spool_rate_bound = (valve_gain * current_limit + b.spool_bound) / time_constant;
    double a = 0.0;
    for (const WeightBlock& w : blocks) a += 0.5 * w.leakage * w.ideal_norm_squared;
    a += square(gains.penalty_force * time_constant * b.spool_rate_bound) / (4.0 * b.k31);
    a += square(gains.penalty_force * approx_error_bound) / (4.0 * b.k32);
    b.alpha1 = a;
    return b;
}

/// Ultimate bounds of e1 and e2 once the force loop has settled; the gain
/// M of the bound is taken to be the moment arm.
struct PositionBounds {
    double angle_error = 0.0;
    double virtual_error = 0.0;
};

inline PositionBounds position_bounds(const UubBounds& low, const LlGains& ll, const HlGains& hl,
                                      double arm, double k21) {
    const double k_rho3 = ll.k_force * ll.penalty_force;
    const double num = square(arm) * low.alpha1;
    return {std::sqrt(num / (4.0 * hl.k_virtual * k_rho3 * k21)),
            std::sqrt(num / (4.0 * hl.k_velocity * k_rho3 * k21))};
}

inline std::vector<Issue> validate(const LlGains& g, const std::string& prefix = "lowlevel") {
    std::vector<Issue> out;
    auto need = [&](bool ok, const char* key, const char* msg) {
        if (!ok) out.push_back({prefix + "." + key, msg});
    };
    need(g.k_force > 0, "k_force", "must be > 0");
    need(g.penalty_force > 0, "penalty_force", "must be > 0");
    need(g.k_aux > 0.5, "k_aux", "must exceed 0.5");
    need(g.aux_deadzone > 0, "aux_deadzone", "must be > 0");
    need(g.smoothing_halfwidth > 0, "smoothing_halfwidth", "must be > 0");
    return out;
}

}  // namespace exo
