#pragma once

// Hydraulically actuated ankle joint: servo valve, double-acting cylinder,
// gas accumulator supply, shank pendulum and the cylinder mounting geometry.
//
// Every function here is pure. The simulator owns the PlantState and feeds it
// through plant_derivative() inside its integrator.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "exo/errors.hpp"
#include "exo/math.hpp"

namespace exo {

/// Physical constants of the shank, cylinder and servo valve.
///
/// Defaults reproduce the bundled scenario. Inertia, CoM distance, bulk
/// modulus, chamber volume, leakage split, mount coordinates and triangle
/// sides are engineering choices, marked "assumed" in scenarios/nominal.jsonc.
struct PlantParams {
    double shank_mass = 70.0;          // kg
    double shank_inertia = 6.3;        // kg m^2
    double com_distance = 0.3;         // m
    double gravity = 9.81;             // m/s^2
    double coulomb_friction = 8.0;     // N
    double viscous_friction = 5000.0;  // N s/m
    double interaction_stiffness = 5000.0;  // N m/rad
    double interaction_damping = 10.0;      // N m s/rad

    double piston_area_a = 3.25e-4;    // m^2, chamber A
    double piston_area_b = 2.10e-4;    // m^2, chamber B
    double bulk_modulus = 7.0e8;       // Pa
    double chamber_volume = 2.0e-5;    // m^3
    double flow_gain = 0.52;
    double flow_pressure_coeff = 8.8e-16;  // m^3 s/Pa
    double internal_leakage = 1.0e-14;     // m^3/(s Pa)
    double external_leakage = 1.0e-14;     // m^3/(s Pa)
    double valve_time_constant = 0.0015;   // s
    double valve_gain = 0.0146;            // m/A

    double cylinder_initial_length = 0.28;  // m
    double piston_initial_position = 0.07;  // m
    double mount1_x = -0.10;  // m, s1 on the foot
    double mount1_y = -0.05;
    double mount2_x = -0.05;  // m, s2 on the shank
    double mount2_y = 0.37;
    double arm_side1 = 0.1118034;  // m, moment-arm triangle sides
    double arm_side2 = 0.3733631;

    double current_min = -0.025;  // A
    double current_max = 0.025;   // A
};

enum class AccumulatorMode { Mode1, Mode2 };

inline const char* to_string(AccumulatorMode mode) noexcept {
    return mode == AccumulatorMode::Mode1 ? "Mode1" : "Mode2";
}

/// Gas accumulator and relay thresholds.
struct AccumulatorParams {
    double polytropic_exponent = 1.4;
    double gas_volume_high = 1.0e-4;  // m^3 at the high threshold
    double flow_rate = 1.0e-5;        // m^3/s through the throttle
    double pressure_high = 5.0e6;     // Pa, equals the pump pressure
    double pressure_low = 3.0e6;      // Pa
    double recharge_time = 0.0;       // s spent in Mode 1 before the relay opens
};

/// Continuous plant variables plus the discrete accumulator mode.
struct PlantState {
    double angle = 0.0;       // rad
    double velocity = 0.0;    // rad/s
    double load_force = 0.0;  // N
    double spool = 0.0;       // m
    AccumulatorMode mode = AccumulatorMode::Mode1;
    double mode2_elapsed = 0.0;  // s since entering Mode 2, zero in Mode 1
    double mode1_elapsed = 0.0;  // s since entering Mode 1, zero in Mode 2
};

/// Time derivative of the continuous part of PlantState.
struct PlantDerivative {
    double angle = 0.0;
    double velocity = 0.0;
    double load_force = 0.0;
    double spool = 0.0;
};

/// Coefficients of the load-force equation at one piston position.
struct HydraulicCoeffs {
    double n1 = 0.0;
    double n2 = 0.0;
    double n3 = 0.0;
    double n4 = 0.0;
    double n5 = 0.0;
};

struct SupplyPressure {
    double pressure = 0.0;  // Pa
    double rate = 0.0;      // Pa/s
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Polar description of the two cylinder mounts relative to the ankle axis.
struct MountGeometry {
    double radius1 = 0.0;
    double radius2 = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;

    [[nodiscard]] double phase() const noexcept { return theta1 + theta2; }
};

inline MountGeometry mount_geometry(const PlantParams& p) {
    MountGeometry g;
    g.radius1 = std::hypot(p.mount1_x, p.mount1_y);
    g.radius2 = std::hypot(p.mount2_x, p.mount2_y);
    if (!(g.radius1 > 0.0) || !(g.radius2 > 0.0)) {
        throw GeometryError("cylinder mount coincides with the joint axis");
    }
    g.theta1 = std::atan(p.mount1_x / -p.mount1_y);
    g.theta2 = std::atan(p.mount2_x / p.mount2_y);
    return g;
}

/// Cylinder length from the law of cosines on the mounting triangle.
inline double cylinder_length(double angle, const PlantParams& p) {
    const MountGeometry g = mount_geometry(p);
    const double radicand = -2.0 * g.radius1 * g.radius2 * std::cos(angle - g.phase()) +
                            square(g.radius1) + square(g.radius2);
    if (!(radicand > 0.0)) {
        throw GeometryError("degenerate cylinder geometry: non-positive length radicand");
    }
    return std::sqrt(radicand);
}

/// dl/dphi, used for the piston velocity x_c' = (dl/dphi) phi'.
inline double cylinder_length_derivative(double angle, const PlantParams& p) {
    const MountGeometry g = mount_geometry(p);
    const double length = cylinder_length(angle, p);
    if (length == 0.0) throw GeometryError("cylinder length is zero");
    return g.radius1 * g.radius2 * std::sin(angle - g.phase()) / length;
}

inline double piston_position(double angle, const PlantParams& p) {
    return cylinder_length(angle, p) - p.cylinder_initial_length - p.piston_initial_position;
}

/// Moment arm of the cylinder force for a given cylinder length.
inline double moment_arm_from_length(double length, const PlantParams& p) {
    const double denom = -2.0 * length * p.arm_side1;
    if (denom == 0.0) throw GeometryError("degenerate moment-arm triangle: zero side");
    const double c = (square(p.arm_side2) - square(length) - square(p.arm_side1)) / denom;
    if (!(c >= -1.0 && c <= 1.0)) {
        throw GeometryError("degenerate moment-arm triangle: acos argument outside [-1, 1]");
    }
    return p.arm_side1 * std::sin(std::acos(c));
}

inline double moment_arm(double angle, const PlantParams& p) {
    return moment_arm_from_length(cylinder_length(angle, p), p);
}

// ---------------------------------------------------------------------------
// Forces
// ---------------------------------------------------------------------------

/// Coulomb plus viscous friction of the piston, sgn(0) = 0.
constexpr double friction_force(double velocity, double coulomb, double viscous) noexcept {
    return -coulomb * sgn(velocity) - viscous * velocity;
}

/// Spring-damper model of the human-machine disagreement torque.
constexpr double interaction_torque(double angle_error, double angle_error_rate,
                                    double stiffness, double damping) noexcept {
    return stiffness * angle_error + damping * angle_error_rate;
}

// ---------------------------------------------------------------------------
// Supply pressure
// ---------------------------------------------------------------------------

/// Polytropic discharge of the accumulator after `elapsed` seconds in Mode 2.
inline SupplyPressure discharge_pressure(double elapsed, const AccumulatorParams& acc) noexcept {
    const double r0 = acc.polytropic_exponent;
    const double volume = acc.gas_volume_high + acc.flow_rate * elapsed;
    SupplyPressure s;
    s.pressure = acc.pressure_high * std::pow(acc.gas_volume_high / volume, r0);
    s.rate = -acc.pressure_high * r0 * acc.flow_rate * std::pow(acc.gas_volume_high, r0) *
             std::pow(volume, -r0 - 1.0);
    return s;
}

inline SupplyPressure accumulator_pressure(AccumulatorMode mode, double mode2_elapsed,
                                           const AccumulatorParams& acc) noexcept {
    if (mode == AccumulatorMode::Mode1) return {acc.pressure_high, 0.0};
    return discharge_pressure(mode2_elapsed, acc);
}

inline SupplyPressure accumulator_pressure(const PlantState& s, const AccumulatorParams& acc) noexcept {
    return accumulator_pressure(s.mode, s.mode2_elapsed, acc);
}

/// Gas volume at the low threshold, from P V^r0 = const.
inline double gas_volume_low(const AccumulatorParams& acc) noexcept {
    return acc.gas_volume_high *
           std::pow(acc.pressure_high / acc.pressure_low, 1.0 / acc.polytropic_exponent);
}

/// Closed-form length of one Mode-2 interval.
inline double discharge_duration(const AccumulatorParams& acc) noexcept {
    return (gas_volume_low(acc) - acc.gas_volume_high) / acc.flow_rate;
}

/// Relay logic. Mode 2 ends when the pressure has dropped to the low
/// threshold; Mode 1 ends once the recharge time has elapsed (the pump
/// restores the high threshold).
inline PlantState update_mode(PlantState s, const AccumulatorParams& acc) noexcept {
    if (s.mode == AccumulatorMode::Mode2) {
        if (discharge_pressure(s.mode2_elapsed, acc).pressure <= acc.pressure_low) {
            s.mode = AccumulatorMode::Mode1;
            s.mode2_elapsed = 0.0;
            s.mode1_elapsed = 0.0;
        }
    } else if (s.mode1_elapsed >= acc.recharge_time) {
        s.mode = AccumulatorMode::Mode2;
        s.mode2_elapsed = 0.0;
        s.mode1_elapsed = 0.0;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Saturation
// ---------------------------------------------------------------------------

struct SaturatedInput {
    double applied = 0.0;   // A
    double residual = 0.0;  // A, the part that could not be applied
};

constexpr SaturatedInput saturate(double raw, double lo, double hi) noexcept {
    if (raw > hi) return {hi, hi - raw};
    if (raw < lo) return {lo, lo - raw};
    return {raw, 0.0};
}

constexpr SaturatedInput saturate(double raw, const PlantParams& p) noexcept {
    return saturate(raw, p.current_min, p.current_max);
}

// ---------------------------------------------------------------------------
// Hydraulics and full state derivative
// ---------------------------------------------------------------------------

inline HydraulicCoeffs hydraulic_coeffs(double piston_pos, const PlantParams& p) {
    const double a1 = p.piston_area_a;
    const double a2 = p.piston_area_b;
    const double denom = 2.0 * p.chamber_volume + (a1 - a2) * piston_pos;
    if (!(denom > 0.0)) {
        throw GeometryError("chamber volume exhausted: 2 V0 + (A1 - A2) x_c <= 0");
    }
    const double beta = p.bulk_modulus;
    const double leak = 2.0 * p.flow_pressure_coeff + 2.0 * p.internal_leakage + p.external_leakage;
    HydraulicCoeffs c;
    c.n1 = 2.0 * beta * (a1 + a2) * p.flow_gain / denom;
    c.n2 = beta * square(a1 + a2) / denom;
    c.n3 = 2.0 * beta * leak / denom;
    c.n4 = beta * leak * (a2 - a1) / denom;
    c.n5 = (a2 - a1) / 2.0 - square(a1 + a2) / (2.0 * denom);
    return c;
}

/// Right-hand side of the plant. `ref` is the human's intended motion, which
/// only enters through the interaction torque.
inline PlantDerivative plant_derivative(const PlantState& s, double current,
                                        const ReferencePoint& ref, const PlantParams& p,
                                        const AccumulatorParams& acc) {
    const double length = cylinder_length(s.angle, p);
    const double arm = moment_arm_from_length(length, p);
    const double piston_rate = cylinder_length_derivative(s.angle, p) * s.velocity;
    const HydraulicCoeffs c =
        hydraulic_coeffs(length - p.cylinder_initial_length - p.piston_initial_position, p);
    const SupplyPressure supply = accumulator_pressure(s, acc);

    const double friction = friction_force(s.velocity, p.coulomb_friction, p.viscous_friction);
    const double tau_hm = interaction_torque(s.angle - ref.angle, s.velocity - ref.velocity,
                                             p.interaction_stiffness, p.interaction_damping);

    PlantDerivative d;
    d.angle = s.velocity;
    d.velocity = (arm * (s.load_force + friction) -
                  p.shank_mass * p.gravity * p.com_distance * std::sin(s.angle) + tau_hm) /
                 p.shank_inertia;
    d.load_force = c.n1 * s.spool - c.n2 * piston_rate - c.n3 * s.load_force +
                   c.n4 * supply.pressure + c.n5 * supply.rate;
    d.spool = (p.valve_gain * current - s.spool) / p.valve_time_constant;
    return d;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline std::vector<Issue> validate(const PlantParams& p, const std::string& prefix = "plant") {
    std::vector<Issue> out;
    auto need = [&](bool ok, const char* key, const char* msg) {
        if (!ok) out.push_back({prefix + "." + key, msg});
    };
    need(p.shank_mass > 0, "shank_mass", "must be > 0");
    need(p.shank_inertia > 0, "shank_inertia", "must be > 0");
    need(p.com_distance > 0, "com_distance", "must be > 0");
    need(p.coulomb_friction >= 0, "coulomb_friction", "must be >= 0");
    need(p.viscous_friction >= 0, "viscous_friction", "must be >= 0");
    need(p.piston_area_b > 0, "piston_area_b", "must be > 0");
    need(p.piston_area_a > p.piston_area_b, "piston_area_a", "must exceed piston_area_b");
    need(p.bulk_modulus > 0, "bulk_modulus", "must be > 0");
    need(p.chamber_volume > 0, "chamber_volume", "must be > 0");
    need(p.flow_gain > 0, "flow_gain", "must be > 0");
    need(p.flow_pressure_coeff >= 0, "flow_pressure_coeff", "must be >= 0");
    need(p.internal_leakage >= 0, "internal_leakage", "must be >= 0");
    need(p.external_leakage >= 0, "external_leakage", "must be >= 0");
    need(p.valve_time_constant > 0, "valve_time_constant", "must be > 0");
    need(p.valve_gain > 0, "valve_gain", "must be > 0");
    need(std::hypot(p.mount1_x, p.mount1_y) > 0, "mount1_x", "mount s1 lies on the joint axis");
    need(std::hypot(p.mount2_x, p.mount2_y) > 0, "mount2_x", "mount s2 lies on the joint axis");
    need(p.arm_side1 > 0, "arm_side1", "moment-arm triangle invalid: side must be > 0");
    need(p.arm_side2 > 0, "arm_side2", "moment-arm triangle invalid: side must be > 0");
    need(p.current_min <= p.current_max, "current_min", "ordering violated: current_min > current_max");
    return out;
}

inline std::vector<Issue> validate(const AccumulatorParams& a,
                                   const std::string& prefix = "accumulator") {
    std::vector<Issue> out;
    auto need = [&](bool ok, const char* key, const char* msg) {
        if (!ok) out.push_back({prefix + "." + key, msg});
    };
    need(a.polytropic_exponent > 1, "polytropic_exponent", "must be > 1");
    need(a.gas_volume_high > 0, "gas_volume_high", "must be > 0");
    need(a.flow_rate > 0, "flow_rate", "must be > 0");
    need(a.pressure_low > 0, "pressure_low", "must be > 0");
    need(a.pressure_low < a.pressure_high, "pressure_low", "must be below pressure_high");
    need(a.recharge_time >= 0, "recharge_time", "must be >= 0");
    return out;
}

/// Checks that the cylinder, the moment-arm triangle and the chamber volumes
/// stay valid for every angle in [lo, hi].
inline std::vector<Issue> validate_geometry_range(const PlantParams& p, double lo, double hi,
                                                  int samples = 201) {
    std::vector<Issue> out;
    for (int i = 0; i < samples; ++i) {
        const double angle = lo + (hi - lo) * i / (samples - 1);
        try {
            const double length = cylinder_length(angle, p);
            const double arm = moment_arm_from_length(length, p);
            if (!(arm > 0.0)) throw GeometryError("moment arm vanishes");
            (void)hydraulic_coeffs(piston_position(angle, p), p);
        } catch (const GeometryError& e) {
            out.push_back({"plant.arm_side1", "triangle invalid at angle " +
                                                  std::to_string(angle) + " rad: " + e.what()});
            break;
        }
    }
    return out;
}

}  // namespace exo
