#pragma once

// Neural approximator for a piecewise-discontinuous function of four inputs:
// Gaussian radial bases for the continuous part plus one-sided jump bases
// anchored at the known discontinuity locations, with sigma-modified online
// weight adaptation.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "exo/errors.hpp"
#include "exo/math.hpp"

namespace exo {

enum class RbfKind {
    Gaussian,   // exp(-|Z - mu|^2 / width^2)
    Quadratic,  // |Z - mu|^2 / width^2, the literal unbounded form
};

struct RbfConfig {
    std::vector<Vec4> centers;
    double width = 20000.0;
    RbfKind kind = RbfKind::Gaussian;

    [[nodiscard]] std::size_t size() const noexcept { return centers.size(); }
};

/// One-sided bases, evaluated coordinate by coordinate at Z + offset.
/// Orders run from `first_order` to `first_order + orders - 1`; order 0 is the
/// unit step, higher orders are (1 - e^-v)^i.
struct JumpConfig {
    int orders = 8;
    int first_order = 0;
    Vec4 offset_pos{};  // c1
    Vec4 offset_neg{};  // c2

    [[nodiscard]] std::size_t size() const noexcept { return 4 * static_cast<std::size_t>(orders); }
};

/// Affine map applied to the raw regressor input before any basis sees it:
/// scaled = (raw - offset) / scale.
struct InputScaling {
    Vec4 offset{0.0, 0.0, 0.0, 0.0};
    Vec4 scale{1.0, 1.0, 1.0, 1.0};

    [[nodiscard]] Vec4 apply(const Vec4& raw) const noexcept {
        Vec4 out{};
        for (std::size_t j = 0; j < 4; ++j) out[j] = (raw[j] - offset[j]) / scale[j];
        return out;
    }
    [[nodiscard]] double apply(std::size_t j, double raw) const noexcept {
        return (raw - offset[j]) / scale[j];
    }
};

/// Regressor input: load force (N), joint velocity (rad/s), rate of the
/// friction-compensated desired force (N/s) and supply pressure (Pa).
struct RegressorInput {
    double load_force = 0.0;
    double velocity = 0.0;
    double desired_force_rate = 0.0;
    double supply_pressure = 0.0;

    [[nodiscard]] Vec4 as_vector() const noexcept {
        return {load_force, velocity, desired_force_rate, supply_pressure};
    }
};

/// Evenly spaced centers over the box [lo, hi] in the first three coordinates;
/// the fourth coordinate of every center is fixed at `fourth`.
inline std::vector<Vec4> grid_centers(const std::array<double, 3>& lo,
                                      const std::array<double, 3>& hi, int per_axis,
                                      double fourth = 0.0) {
    if (per_axis < 1) throw ConfigError("network.rbf.per_axis", "must be >= 1");
    auto node = [&](std::size_t axis, int i) {
        return per_axis == 1 ? 0.5 * (lo[axis] + hi[axis])
                             : lo[axis] + (hi[axis] - lo[axis]) * i / (per_axis - 1);
    };
    std::vector<Vec4> out;
    out.reserve(static_cast<std::size_t>(per_axis * per_axis * per_axis));
    for (int i = 0; i < per_axis; ++i)
        for (int j = 0; j < per_axis; ++j)
            for (int k = 0; k < per_axis; ++k)
                out.push_back({node(0, i), node(1, j), node(2, k), fourth});
    return out;
}

/// Offsets placing the jumps at phi' = -eps0 / +eps0 and at the pressure
/// threshold, both in scaled coordinates.
constexpr JumpConfig make_jump_config(double eps0_scaled, double pressure_low_scaled,
                                      int orders = 8, int first_order = 0) noexcept {
    JumpConfig c;
    c.orders = orders;
    c.first_order = first_order;
    c.offset_pos = {0.0, eps0_scaled, 0.0, pressure_low_scaled};
    c.offset_neg = {0.0, -eps0_scaled, 0.0, pressure_low_scaled};
    return c;
}

inline double rbf_value(const Vec4& z, const Vec4& center, double width, RbfKind kind) noexcept {
    double d2 = 0.0;
    for (std::size_t j = 0; j < 4; ++j) d2 += square(z[j] - center[j]);
    const double q = d2 / square(width);
    return kind == RbfKind::Gaussian ? std::exp(-q) : q;
}

inline std::vector<double> rbf_basis(const Vec4& z, const RbfConfig& cfg) {
    std::vector<double> h;
    h.reserve(cfg.size());
    for (const Vec4& c : cfg.centers) h.push_back(rbf_value(z, c, cfg.width, cfg.kind));
    return h;
}

/// Order-i jump basis of a scalar argument.
inline double jump_value(double v, int order) noexcept {
    if (v < 0.0) return 0.0;
    if (order == 0) return 1.0;
    return std::pow(1.0 - std::exp(-v), order);
}

/// Coordinate-major: entry [j * orders + k] is order first_order + k of v[j].
inline void append_jump_basis(const Vec4& v, int orders, int first_order,
                              std::vector<double>& out) {
    for (std::size_t j = 0; j < 4; ++j)
        for (int k = 0; k < orders; ++k) out.push_back(jump_value(v[j], first_order + k));
}

inline std::vector<double> jump_basis(const Vec4& v, int orders, int first_order = 0) {
    std::vector<double> out;
    out.reserve(4 * static_cast<std::size_t>(orders));
    append_jump_basis(v, orders, first_order, out);
    return out;
}

inline Vec4 shifted(const Vec4& z, const Vec4& offset) noexcept {
    return {z[0] + offset[0], z[1] + offset[1], z[2] + offset[2], z[3] + offset[3]};
}

/// chi(Z) = [h(Z); jump(Z + c1); jump(Z + c2)] for an already scaled Z.
inline std::vector<double> regressor(const Vec4& z, const RbfConfig& rbf, const JumpConfig& jump) {
    std::vector<double> chi;
    chi.reserve(rbf.size() + 2 * jump.size());
    for (const Vec4& c : rbf.centers) chi.push_back(rbf_value(z, c, rbf.width, rbf.kind));
    append_jump_basis(shifted(z, jump.offset_pos), jump.orders, jump.first_order, chi);
    append_jump_basis(shifted(z, jump.offset_neg), jump.orders, jump.first_order, chi);
    return chi;
}

enum class WeightStep {
    Euler,  // W += dt Gamma (rho3 e3 chi - sigma W)
    Exact,  // zero-order-hold solution of the same linear ODE over dt
};

/// Output weights with diagonal learning-rate and leakage matrices.
struct ApproxNet {
    std::vector<double> weights;
    std::vector<double> learning_rate;  // diag(Gamma)
    std::vector<double> leakage;        // diag(sigma)

    ApproxNet() = default;
    ApproxNet(std::size_t n, double gamma, double sigma)
        : weights(n, 0.0), learning_rate(n, gamma), leakage(n, sigma) {}

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }

    [[nodiscard]] double weight_norm() const noexcept {
        double s = 0.0;
        for (const double w : weights) s += w * w;
        return std::sqrt(s);
    }
};

inline void check_dimensions(const std::vector<double>& chi, const ApproxNet& net) {
    if (chi.size() != net.weights.size() || net.learning_rate.size() != net.weights.size() ||
        net.leakage.size() != net.weights.size()) {
        throw ConfigError("network", "regressor length " + std::to_string(chi.size()) +
                                         " does not match weight vector length " +
                                         std::to_string(net.weights.size()));
    }
}

/// W^T chi.
inline double estimate(const std::vector<double>& chi, const ApproxNet& net) {
    check_dimensions(chi, net);
    double s = 0.0;
    for (std::size_t i = 0; i < chi.size(); ++i) s += net.weights[i] * chi[i];
    return s;
}

/// Sigma-modified gradient update over one sample period.
inline void update_weights(ApproxNet& net, double force_error, const std::vector<double>& chi,
                           double rho3, double dt, WeightStep step = WeightStep::Euler) {
    check_dimensions(chi, net);
    for (std::size_t i = 0; i < chi.size(); ++i) {
        const double gamma = net.learning_rate[i];
        const double sigma = net.leakage[i];
        const double drive = rho3 * force_error * chi[i];
        double& w = net.weights[i];
        if (step == WeightStep::Euler || sigma == 0.0) {
            w += dt * gamma * (drive - sigma * w);
        } else {
            const double decay = std::exp(-gamma * sigma * dt);
            w = decay * w + (1.0 - decay) * drive / sigma;
        }
    }
}

inline std::vector<Issue> validate(const ApproxNet& net, const RbfConfig& rbf,
                                   const JumpConfig& jump, const std::string& prefix = "network") {
    std::vector<Issue> out;
    if (rbf.centers.empty()) out.push_back({prefix + ".rbf.per_axis", "need at least one center"});
    if (!(rbf.width > 0)) out.push_back({prefix + ".rbf.width", "must be > 0"});
    if (jump.orders < 1) out.push_back({prefix + ".jump.orders", "must be >= 1"});
    if (jump.first_order < 0) out.push_back({prefix + ".jump.first_order", "must be >= 0"});
    for (const double g : net.learning_rate) {
        if (!(g > 0)) {
            out.push_back({prefix + ".learning_rate", "must be > 0"});
            break;
        }
    }
    for (const double s : net.leakage) {
        if (!(s >= 0)) {
            out.push_back({prefix + ".leakage", "must be >= 0"});
            break;
        }
    }
    return out;
}

}  // namespace exo
