#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace vasim {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kMu0 = 4.0e-7 * kPi; // T·m/A

namespace units {
inline constexpr double mm = 1e-3;
inline constexpr double mL = 1e-6;
inline constexpr double mT = 1e-3;
inline constexpr double cm_per_s = 1e-2;

constexpr double rpm_to_hz(double rpm) { return rpm / 60.0; }
constexpr double hz_to_rpm(double hz) { return hz * 60.0; }
} // namespace units

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// Any unit vector orthogonal to `axis` (deterministic choice).
inline Vec3 any_perpendicular(const Vec3& axis) {
    const Vec3 a = axis.normalized();
    const Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return a.cross(helper).normalized();
}

} // namespace vasim
