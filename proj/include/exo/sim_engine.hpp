#pragma once

// Fixed-step closed-loop simulation of the ankle joint: RK4 over the
// continuous plant with the servo current held for one sample, explicit
// updates of the discrete controller states, per-step trace and metrics.
//
// Step order (fixed, the one-sample residual delay depends on it):
//   1. reference at t_k
//   2. tracking errors and desired force with the current estimates
//   3. high-level adaptation increments
//   4. regressor, network estimate, current, saturation, xi and weight updates
//   5. plant integration over dt with the current held
//   6. accumulator mode update
//   7. trace append

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exo/errors.hpp"
#include "exo/function_approx.hpp"
#include "exo/highlevel_controller.hpp"
#include "exo/lowlevel_controller.hpp"
#include "exo/math.hpp"
#include "exo/plant_model.hpp"

namespace exo {

struct ReferenceConfig {
    double amplitude = 0.025;  // rad
    double frequency = 1.0;   // Hz
};

/// Sinusoidal joint reference with analytic derivatives.
inline ReferencePoint reference(double t, const ReferenceConfig& cfg) noexcept {
    const double w = 2.0 * std::numbers::pi * cfg.frequency;
    const double a = cfg.amplitude;
    return {a * std::sin(w * t), a * w * std::cos(w * t), -a * w * w * std::sin(w * t)};
}

struct PdGains {
    double kp = -1.0;   // A/rad
    double kd = -0.01;  // A s/rad
};

constexpr double pd_control(double angle_error, double angle_error_rate, const PdGains& g) noexcept {
    return g.kp * angle_error + g.kd * angle_error_rate;
}

enum class ControllerKind {
    Cascade,      // both layers, auxiliary saturation compensation on
    Pd,           // baseline PD on the joint angle
    CascadeNoXi,  // both layers, xi held at zero
    Open,         // zero current, for plant-only checks
};

inline std::string_view to_string(ControllerKind k) noexcept {
    switch (k) {
        case ControllerKind::Cascade: return "Cascade";
        case ControllerKind::Pd: return "Pd";
        case ControllerKind::CascadeNoXi: return "CascadeNoXi";
        case ControllerKind::Open: return "Open";
    }
    return "?";
}

inline ControllerKind parse_controller(std::string_view s) {
    for (const ControllerKind k : {ControllerKind::Cascade, ControllerKind::Pd,
                                   ControllerKind::CascadeNoXi, ControllerKind::Open}) {
        if (s == to_string(k)) return k;
    }
    throw ConfigError("simulation.controller",
                      "unknown controller '" + std::string(s) +
                          "' (expected Cascade, Pd, CascadeNoXi or Open)");
}

/// Basis layout and learning law of the f4 network.
struct NetworkConfig {
    std::array<double, 3> grid_lo{-4.0, -1.0, -4.0};
    std::array<double, 3> grid_hi{4.0, 1.0, 4.0};
    int per_axis = 3;
    double width = 20000.0;
    RbfKind kind = RbfKind::Gaussian;
    int jump_orders = 8;
    int jump_first_order = 0;
    InputScaling scaling{{0.0, 0.0, 0.0, 4.0e6}, {1.0, 1.0, 1.0, 1.0e6}};
    double learning_rate = 1.0e5;
    double leakage = 0.2;
    WeightStep weight_step = WeightStep::Exact;
};

inline RbfConfig make_rbf(const NetworkConfig& n) {
    // the fourth center coordinate sits at the middle of the scaled pressure range
    return {grid_centers(n.grid_lo, n.grid_hi, n.per_axis, 0.0), n.width, n.kind};
}

inline JumpConfig make_jump(const NetworkConfig& n, const LlGains& ll, const AccumulatorParams& acc) {
    const double eps = ll.smoothing_halfwidth / n.scaling.scale[1];
    const double plow = n.scaling.apply(3, acc.pressure_low);
    return make_jump_config(eps, plow, n.jump_orders, n.jump_first_order);
}

struct SimConfig {
    double dt = 0.001;
    double duration = 10.0;
    ReferenceConfig reference;
    ControllerKind controller = ControllerKind::Cascade;
    PlantParams plant;
    AccumulatorParams accumulator;
    HlGains highlevel;
    HlEstimates initial_estimates;
    LlGains lowlevel;
    NetworkConfig network;
    PdGains pd;
    PlantState initial_state;
    double metrics_window_start = 1.0;  // s, transient excluded from metrics
    bool log_weights = false;
};

inline std::vector<Issue> validate(const SimConfig& c) {
    std::vector<Issue> out;
    auto append = [&](std::vector<Issue> v) { out.insert(out.end(), v.begin(), v.end()); };
    if (!(c.dt > 0)) out.push_back({"simulation.dt", "must be > 0"});
    if (!(c.duration >= 0)) out.push_back({"simulation.duration", "must be >= 0"});
    if (c.duration > 0 && c.duration < c.dt) out.push_back({"simulation.duration", "must be >= dt"});
    if (!(c.reference.amplitude >= 0)) out.push_back({"reference.amplitude", "must be >= 0"});
    if (!(c.metrics_window_start >= 0)) out.push_back({"simulation.metrics_window_start", "must be >= 0"});
    append(validate(c.plant));
    append(validate(c.accumulator));
    append(validate(c.highlevel));
    append(validate(c.lowlevel));
    for (std::size_t j = 0; j < 4; ++j) {
        if (!(c.network.scaling.scale[j] != 0.0)) {
            out.push_back({"network.scaling.scale", "entries must be non-zero"});
            break;
        }
    }
    if (c.network.per_axis < 1) out.push_back({"network.rbf.per_axis", "must be >= 1"});
    if (!(c.network.width > 0)) out.push_back({"network.rbf.width", "must be > 0"});
    if (c.network.jump_orders < 1) out.push_back({"network.jump.orders", "must be >= 1"});
    if (c.network.jump_first_order < 0) out.push_back({"network.jump.first_order", "must be >= 0"});
    if (!(c.network.learning_rate > 0)) out.push_back({"network.learning_rate", "must be > 0"});
    if (!(c.network.leakage >= 0)) out.push_back({"network.leakage", "must be >= 0"});
    if (out.empty()) {
        const double margin = 0.05;
        const double lo = -c.reference.amplitude - margin;
        const double hi = c.reference.amplitude + margin;
        append(validate_geometry_range(c.plant, lo, hi));
    }
    return out;
}

inline std::size_t step_count(double duration, double dt) noexcept {
    if (!(duration > 0)) return 0;
    const double n = duration / dt;
    const double r = std::round(n);
    return static_cast<std::size_t>(std::abs(n - r) < 1e-9 * std::max(1.0, r) ? r : std::ceil(n));
}

/// One row per simulated step, values at the start of the step.
struct TraceRecord {
    double t = 0;
    double phi = 0;
    double phi_dot = 0;
    double phi_d = 0;
    double e1 = 0;
    double e1_dot = 0;
    double e2 = 0;
    double tau_hm = 0;
    double F_L = 0;
    double F_L_d = 0;
    double e3 = 0;
    double x_v = 0;
    double u_raw = 0;
    double u_applied = 0;
    double delta = 0;
    double xi = 0;
    double J_hat = 0;
    double m_hat = 0;
    double F_C_hat = 0;
    double b_hat = 0;
    double W_norm = 0;
    double f4_ref = 0;
    double f4_est = 0;
    double P_s = 0;
    AccumulatorMode mode = AccumulatorMode::Mode1;
};

/// Visits every numeric column as (name, value); `mode` is handled by callers.
template <typename F>
void for_each_numeric(const TraceRecord& r, F&& f) {
    f("t", r.t);
    f("phi", r.phi);
    f("phi_dot", r.phi_dot);
    f("phi_d", r.phi_d);
    f("e1", r.e1);
    f("e1_dot", r.e1_dot);
    f("e2", r.e2);
    f("tau_hm", r.tau_hm);
    f("F_L", r.F_L);
    f("F_L_d", r.F_L_d);
    f("e3", r.e3);
    f("x_v", r.x_v);
    f("u_raw", r.u_raw);
    f("u_applied", r.u_applied);
    f("delta", r.delta);
    f("xi", r.xi);
    f("J_hat", r.J_hat);
    f("m_hat", r.m_hat);
    f("F_C_hat", r.F_C_hat);
    f("b_hat", r.b_hat);
    f("W_norm", r.W_norm);
    f("f4_ref", r.f4_ref);
    f("f4_est", r.f4_est);
    f("P_s", r.P_s);
}

inline std::vector<std::string> trace_columns() {
    std::vector<std::string> names;
    for_each_numeric(TraceRecord{}, [&](const char* n, double) { names.emplace_back(n); });
    names.emplace_back("mode");
    return names;
}

/// Value of a numeric column by name; throws ConfigError for unknown names.
inline double trace_value(const TraceRecord& r, std::string_view column) {
    double out = 0.0;
    bool found = false;
    for_each_numeric(r, [&](const char* n, double v) {
        if (column == n) {
            out = v;
            found = true;
        }
    });
    if (column == "mode") return r.mode == AccumulatorMode::Mode1 ? 1.0 : 2.0;
    if (!found) throw ConfigError("plots", "unknown trace column '" + std::string(column) + "'");
    return out;
}

struct Metrics {
    double rms_e1 = 0;
    double max_abs_e1 = 0;
    double rms_tau_hm = 0;
    double rms_e3 = 0;
    double control_effort = 0;       // integral of u^2, A^2 s
    double saturation_fraction = 0;  // share of steps with a non-zero residual
};

template <typename F>
void for_each_metric(const Metrics& m, F&& f) {
    f("rms_e1", m.rms_e1);
    f("max_abs_e1", m.max_abs_e1);
    f("rms_tau_hm", m.rms_tau_hm);
    f("rms_e3", m.rms_e3);
    f("control_effort", m.control_effort);
    f("saturation_fraction", m.saturation_fraction);
}

/// Metrics over records with t >= window_start.
inline Metrics compute_metrics(const std::vector<TraceRecord>& trace, double window_start, double dt) {
    Metrics m;
    std::size_t n = 0;
    std::size_t saturated = 0;
    double s_e1 = 0, s_tau = 0, s_e3 = 0;
    for (const TraceRecord& r : trace) {
        if (r.t + 1e-12 < window_start) continue;
        ++n;
        s_e1 += r.e1 * r.e1;
        s_tau += r.tau_hm * r.tau_hm;
        s_e3 += r.e3 * r.e3;
        m.max_abs_e1 = std::max(m.max_abs_e1, std::abs(r.e1));
        m.control_effort += r.u_applied * r.u_applied * dt;
        if (r.delta != 0.0) ++saturated;
    }
    if (n == 0) return m;
    const double dn = static_cast<double>(n);
    m.rms_e1 = std::sqrt(s_e1 / dn);
    m.rms_tau_hm = std::sqrt(s_tau / dn);
    m.rms_e3 = std::sqrt(s_e3 / dn);
    m.saturation_fraction = static_cast<double>(saturated) / dn;
    return m;
}

// ---------------------------------------------------------------------------
// Plant integration
// ---------------------------------------------------------------------------

namespace detail {

inline PlantState advance(const PlantState& s, const PlantDerivative& d, double h) noexcept {
    PlantState out = s;
    out.angle += h * d.angle;
    out.velocity += h * d.velocity;
    out.load_force += h * d.load_force;
    out.spool += h * d.spool;
    if (s.mode == AccumulatorMode::Mode2) out.mode2_elapsed += h;
    else out.mode1_elapsed += h;
    return out;
}

}  // namespace detail

/// Classical RK4 step of length h (may be negative) with the current held.
/// The accumulator mode is frozen over the step; its timer advances exactly.
inline PlantState integrate_plant(const PlantState& s, double current, double t, double h,
                                  const PlantParams& p, const AccumulatorParams& acc,
                                  const ReferenceConfig& ref) {
    const PlantDerivative k1 = plant_derivative(s, current, reference(t, ref), p, acc);
    const PlantDerivative k2 =
        plant_derivative(detail::advance(s, k1, h / 2), current, reference(t + h / 2, ref), p, acc);
    const PlantDerivative k3 =
        plant_derivative(detail::advance(s, k2, h / 2), current, reference(t + h / 2, ref), p, acc);
    const PlantDerivative k4 =
        plant_derivative(detail::advance(s, k3, h), current, reference(t + h, ref), p, acc);
    PlantDerivative avg;
    avg.angle = (k1.angle + 2 * k2.angle + 2 * k3.angle + k4.angle) / 6;
    avg.velocity = (k1.velocity + 2 * k2.velocity + 2 * k3.velocity + k4.velocity) / 6;
    avg.load_force = (k1.load_force + 2 * k2.load_force + 2 * k3.load_force + k4.load_force) / 6;
    avg.spool = (k1.spool + 2 * k2.spool + 2 * k3.spool + k4.spool) / 6;
    return detail::advance(s, avg, h);
}

/// Desired force and its friction-compensated counterpart at one state.
struct ForceDemand {
    double desired = 0.0;      // F_L,d
    double compensated = 0.0;  // F_L,d + F_f estimate
};

inline ForceDemand force_demand(const PlantState& s, const ReferencePoint& ref,
                                const HlEstimates& est, const SimConfig& cfg) {
    const PlantParams& p = cfg.plant;
    const double arm = moment_arm(s.angle, p);
    const double tau_hm = interaction_torque(s.angle - ref.angle, s.velocity - ref.velocity,
                                             p.interaction_stiffness, p.interaction_damping);
    const TrackingErrors err = compute_errors(s.angle, s.velocity, ref, cfg.highlevel.k_virtual);
    const double fd = desired_force(err, s.angle, s.velocity, est, tau_hm, cfg.highlevel, arm,
                                    leg_constants(p));
    return {fd, fd + estimated_friction(s.velocity, est)};
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

/// Thrown when a NaN/Inf or a diverging estimate stops the run. Carries the
/// trace recorded up to the last good step.
class SimulationAborted : public NumericError {
public:
    SimulationAborted(const std::string& what, std::vector<TraceRecord> partial)
        : NumericError(what), trace(std::move(partial)) {}
    std::vector<TraceRecord> trace;
};

class Simulator {
public:
    explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
        const std::vector<Issue> issues = validate(cfg_);
        if (!issues.empty()) throw ConfigError(issues.front().path, issues.front().message);
        rbf_ = make_rbf(cfg_.network);
        jump_ = make_jump(cfg_.network, cfg_.lowlevel, cfg_.accumulator);
        net_ = ApproxNet(rbf_.size() + 2 * jump_.size(), cfg_.network.learning_rate,
                         cfg_.network.leakage);
        plant_ = cfg_.initial_state;
        est_ = cfg_.initial_estimates;
    }

    [[nodiscard]] const SimConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const PlantState& plant() const noexcept { return plant_; }
    [[nodiscard]] const HlEstimates& estimates() const noexcept { return est_; }
    [[nodiscard]] const ApproxNet& network() const noexcept { return net_; }
    [[nodiscard]] const LlState& lowlevel_state() const noexcept { return ll_; }
    [[nodiscard]] const RbfConfig& rbf() const noexcept { return rbf_; }
    [[nodiscard]] const JumpConfig& jump() const noexcept { return jump_; }
    [[nodiscard]] std::size_t steps_taken() const noexcept { return k_; }
    [[nodiscard]] double time() const noexcept { return static_cast<double>(k_) * cfg_.dt; }

    /// Advances one sample period and returns the record of the step start.
    TraceRecord step() {
        const SimConfig& c = cfg_;
        const PlantParams& p = c.plant;
        const double dt = c.dt;
        const double t = time();
        const PlantState s = plant_;

        const ReferencePoint ref = reference(t, c.reference);
        const double arm = moment_arm(s.angle, p);
        const double e1_dot = s.velocity - ref.velocity;
        const double tau_hm = interaction_torque(s.angle - ref.angle, e1_dot,
                                                 p.interaction_stiffness, p.interaction_damping);
        const TrackingErrors err = compute_errors(s.angle, s.velocity, ref, c.highlevel.k_virtual);
        const LegConstants leg = leg_constants(p);
        const double fd = desired_force(err, s.angle, s.velocity, est_, tau_hm, c.highlevel, arm, leg);
        const HlEstimates rates = estimate_rates(err, s.angle, s.velocity, c.highlevel, arm, leg);

        const double compensated = fd + estimated_friction(s.velocity, est_);
        const double compensated_rate = ll_.has_prev ? (compensated - ll_.prev_compensated_force) / dt : 0.0;
        const SupplyPressure supply = accumulator_pressure(s, c.accumulator);
        const RegressorInput z{s.load_force, s.velocity, compensated_rate, supply.pressure};
        const std::vector<double> chi = regressor(c.network.scaling.apply(z.as_vector()), rbf_, jump_);
        const double e3 = force_error(s.load_force, fd);
        const double nn = estimate(chi, net_);

        const bool cascade = c.controller == ControllerKind::Cascade ||
                             c.controller == ControllerKind::CascadeNoXi;
        const double xi = c.controller == ControllerKind::Cascade ? ll_.xi : 0.0;
        CurrentCommand cmd;
        switch (c.controller) {
            case ControllerKind::Cascade:
            case ControllerKind::CascadeNoXi: {
                const double base = control(e3, nn, 0.0, xi, c.lowlevel, p.valve_gain);
                cmd = close_residual_loop(base, ll_.prev_residual, c.lowlevel.residual_feedback,
                                          p.current_min, p.current_max);
                break;
            }
            case ControllerKind::Pd: {
                const SaturatedInput s = saturate(pd_control(err.angle_error, e1_dot, c.pd), p);
                cmd = {pd_control(err.angle_error, e1_dot, c.pd), s.applied, s.residual};
                break;
            }
            case ControllerKind::Open: {
                const SaturatedInput s = saturate(0.0, p);
                cmd = {0.0, s.applied, s.residual};
                break;
            }
        }
        const double u_raw = cmd.raw;
        const SaturatedInput sat{cmd.applied, cmd.residual};

        const PlantDerivative d = plant_derivative(s, sat.applied, ref, p, c.accumulator);
        const double xc = piston_position(s.angle, p);
        const HydraulicCoeffs coeffs = hydraulic_coeffs(xc, p);
        if (!(coeffs.n1 > 0.0)) throw SimulationAborted("n1 <= 0 at t = " + std::to_string(t), trace_tail());
        F4Inputs f4in;
        f4in.coeffs = coeffs;
        f4in.piston_rate = cylinder_length_derivative(s.angle, p) * s.velocity;
        f4in.load_force = s.load_force;
        f4in.compensated_desired_rate = compensated_rate;
        f4in.friction_estimate_rate = friction_derivative_approx(
            s.velocity, d.velocity, est_, rates.viscous, c.lowlevel.smoothing_halfwidth);
        f4in.supply = supply;

        TraceRecord r;
        r.t = t;
        r.phi = s.angle;
        r.phi_dot = s.velocity;
        r.phi_d = ref.angle;
        r.e1 = err.angle_error;
        r.e1_dot = e1_dot;
        r.e2 = err.virtual_error;
        r.tau_hm = tau_hm;
        r.F_L = s.load_force;
        r.F_L_d = fd;
        r.e3 = e3;
        r.x_v = s.spool;
        r.u_raw = u_raw;
        r.u_applied = sat.applied;
        r.delta = sat.residual;
        r.xi = xi;
        r.J_hat = est_.inertia;
        r.m_hat = est_.mass;
        r.F_C_hat = est_.coulomb;
        r.b_hat = est_.viscous;
        r.W_norm = net_.weight_norm();
        r.f4_ref = f4_reference(f4in);
        r.f4_est = nn;
        r.P_s = supply.pressure;
        r.mode = s.mode;

        if (cascade) {
            est_ += rates.scaled(dt);
            update_weights(net_, e3, chi, c.lowlevel.penalty_force, dt, c.network.weight_step);
            if (c.controller == ControllerKind::Cascade) {
                ll_.xi = std::abs(ll_.xi) <= c.lowlevel.aux_deadzone
                             ? rearm_aux(ll_.xi, sat.residual, c.lowlevel.aux_deadzone)
                             : aux_update(ll_.xi, sat.residual, e3, c.lowlevel, p.valve_gain, dt);
            }
        }
        ll_.prev_compensated_force = compensated;
        ll_.has_prev = true;
        ll_.prev_residual = cascade ? sat.residual : 0.0;

        PlantState next = integrate_plant(s, sat.applied, t, dt, p, c.accumulator, c.reference);
        next = update_mode(next, c.accumulator);

        if (!row_finite(r) || !all_finite({next.angle, next.velocity, next.load_force, next.spool}) ||
            !std::isfinite(ll_.xi) || !std::isfinite(net_.weight_norm())) {
            throw SimulationAborted("non-finite value at t = " + std::to_string(t), trace_tail());
        }
        try {
            check_estimates(est_);
        } catch (const NumericError& e) {
            throw SimulationAborted(std::string(e.what()) + " at t = " + std::to_string(t), trace_tail());
        }
        plant_ = next;
        ++k_;
        if (keep_trace_) trace_.push_back(r);
        return r;
    }

    /// Records every step internally so aborts can return a partial trace.
    void keep_trace(bool on) { keep_trace_ = on; }
    [[nodiscard]] const std::vector<TraceRecord>& trace() const noexcept { return trace_; }
    [[nodiscard]] std::vector<TraceRecord> take_trace() { return std::move(trace_); }

private:
    static bool row_finite(const TraceRecord& r) {
        bool ok = true;
        for_each_numeric(r, [&](const char*, double v) { ok = ok && std::isfinite(v); });
        return ok;
    }
    [[nodiscard]] std::vector<TraceRecord> trace_tail() const { return trace_; }

    SimConfig cfg_;
    RbfConfig rbf_;
    JumpConfig jump_;
    ApproxNet net_;
    PlantState plant_;
    HlEstimates est_;
    LlState ll_;
    std::size_t k_ = 0;
    bool keep_trace_ = false;
    std::vector<TraceRecord> trace_;
};

struct RunResult {
    std::vector<TraceRecord> trace;
    Metrics metrics;
    double window_begin = 0.0;
    double window_end = 0.0;
    std::vector<std::vector<double>> weights;  // per step, only with log_weights
};

/// Runs ceil(duration / dt) steps. Throws ConfigError on invalid input and
/// SimulationAborted (with the partial trace) on numeric failure.
inline RunResult run(const SimConfig& cfg) {
    Simulator sim(cfg);
    sim.keep_trace(true);
    RunResult out;
    const std::size_t n = step_count(cfg.duration, cfg.dt);
    if (cfg.log_weights) out.weights.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        sim.step();
        if (cfg.log_weights) out.weights.push_back(sim.network().weights);
    }
    out.trace = sim.take_trace();
    out.window_begin = cfg.metrics_window_start;
    out.window_end = static_cast<double>(n) * cfg.dt;
    out.metrics = compute_metrics(out.trace, cfg.metrics_window_start, cfg.dt);
    return out;
}

}  // namespace exo
