#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <numbers>

namespace exo {

using Vec4 = std::array<double, 4>;

/// Signum with sgn(0) = 0.
constexpr double sgn(double v) noexcept {
    return static_cast<double>((0.0 < v) - (v < 0.0));
}

constexpr double square(double v) noexcept { return v * v; }

inline bool all_finite(std::initializer_list<double> values) noexcept {
    for (const double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// Desired joint trajectory sample: angle plus its first two time derivatives.
struct ReferencePoint {
    double angle = 0.0;         // rad
    double velocity = 0.0;      // rad/s
    double acceleration = 0.0;  // rad/s^2
};

}  // namespace exo
