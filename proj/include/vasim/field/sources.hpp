#pragma once

/// Rotating magnetic field sources: a uniform (Helmholtz) rotating field and a
/// rotating permanent magnet carried by a robotic arm.

#include "vasim/core/errors.hpp"
#include "vasim/core/types.hpp"

#include <cmath>
#include <variant>

namespace vasim::field {

/// What the spinner sees at its location during one tick.
struct FieldSample {
    double magnitude{};                // T
    Vec3 rotation_axis{Vec3::UnitX()}; // unit
    double frequency{};                // Hz
    int sense{1};                      // ±1, right-handed about rotation_axis when +1

    friend bool operator==(const FieldSample&, const FieldSample&) = default;
};

inline Vec3 unit_axis(const Vec3& axis, const char* what) {
    const double n = axis.norm();
    if (!(n > 0.0) || !axis.allFinite()) {
        throw ValidationError(ValidationCode::OutOfRange, std::string(what) + " must be a nonzero finite vector");
    }
    return axis / n;
}

inline int checked_sense(int sense) {
    if (sense != 1 && sense != -1) {
        throw ValidationError(ValidationCode::OutOfRange, "sense must be +1 or -1");
    }
    return sense;
}

class HelmholtzSource {
  public:
    HelmholtzSource() = default;
    HelmholtzSource(const Vec3& axis, double magnitude, double frequency, int sense)
        : axis_(unit_axis(axis, "rotation axis")), magnitude_(magnitude), frequency_(frequency),
          sense_(checked_sense(sense)) {
        if (!(magnitude >= 0.0) || !(frequency >= 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "field magnitude and frequency must be >= 0");
        }
    }

    [[nodiscard]] const Vec3& rotation_axis() const { return axis_; }
    [[nodiscard]] double magnitude() const { return magnitude_; }
    [[nodiscard]] double frequency() const { return frequency_; }
    [[nodiscard]] int sense() const { return sense_; }

  private:
    Vec3 axis_{Vec3::UnitX()};
    double magnitude_{};
    double frequency_{};
    int sense_{1};
};

inline FieldSample sample_helmholtz(const HelmholtzSource& source, const Vec3& /*point*/) {
    return {source.magnitude(), source.rotation_axis(), source.frequency(), source.sense()};
}

/// Point-dipole flux density (T) of moment `moment` located at `source`.
inline Vec3 dipole_B(const Vec3& moment, const Vec3& source, const Vec3& point) {
    const Vec3 r = point - source;
    const double dist = r.norm();
    if (!(dist > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, "dipole field evaluated at the dipole itself");
    }
    const Vec3 r_hat = r / dist;
    const double scale = kMu0 / (4.0 * kPi) / (dist * dist * dist);
    return scale * (3.0 * moment.dot(r_hat) * r_hat - moment);
}

struct DipoleActuator {
    Vec3 position{Vec3::Zero()};
    Vec3 spin_axis{Vec3::UnitX()};
    double moment_magnitude{1.0}; // A·m²
    double frequency{};           // Hz
    int sense{1};

    /// Enforces the unit axis and positive moment; returns a normalised copy.
    [[nodiscard]] DipoleActuator validated() const {
        DipoleActuator out = *this;
        out.spin_axis = unit_axis(spin_axis, "spin axis");
        if (!(moment_magnitude > 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "magnet moment must be > 0");
        }
        if (!(frequency >= 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "frequency must be >= 0");
        }
        checked_sense(sense);
        if (!position.allFinite()) {
            throw ValidationError(ValidationCode::OutOfRange, "actuator position must be finite");
        }
        return out;
    }
};

inline constexpr int kDefaultRmsPhases = 64;

/// RMS |B| over one revolution of a moment spinning perpendicular to the
/// actuator axis, sampled at `phases` equally spaced angles.
inline double rotating_dipole_rms(const DipoleActuator& actuator, const Vec3& point, int phases = kDefaultRmsPhases) {
    const Vec3 e1 = any_perpendicular(actuator.spin_axis);
    const Vec3 e2 = actuator.spin_axis.cross(e1);
    double sum_sq = 0.0;
    for (int k = 0; k < phases; ++k) {
        const double phi = 2.0 * kPi * k / phases;
        const Vec3 m = actuator.moment_magnitude * (std::cos(phi) * e1 + std::sin(phi) * e2);
        sum_sq += dipole_B(m, actuator.position, point).squaredNorm();
    }
    return std::sqrt(sum_sq / phases);
}

/// Summarises the rotating magnet at `point` as (RMS magnitude, spin axis, f, sense).
/// The local rotation axis off the spin axis is approximated by the spin axis.
inline FieldSample sample_rotating_dipole(const DipoleActuator& actuator, const Vec3& point, double /*t*/,
                                          int phases = kDefaultRmsPhases) {
    return {rotating_dipole_rms(actuator, point, phases), actuator.spin_axis, actuator.frequency, actuator.sense};
}

struct PoseDelta {
    Vec3 translation{Vec3::Zero()}; // m
    Vec3 rotation_axis{Vec3::UnitZ()};
    double rotation_angle{};        // rad
};

inline DipoleActuator move_actuator(const DipoleActuator& actuator, const PoseDelta& delta) {
    DipoleActuator out = actuator;
    out.position += delta.translation;
    if (delta.rotation_angle != 0.0) {
        const Eigen::AngleAxisd rotation(delta.rotation_angle, unit_axis(delta.rotation_axis, "rotation axis"));
        out.spin_axis = (rotation * actuator.spin_axis).normalized();
    }
    return out.validated();
}

using FieldSource = std::variant<HelmholtzSource, DipoleActuator>;

inline FieldSample sample(const FieldSource& source, const Vec3& point, double t) {
    if (const auto* coils = std::get_if<HelmholtzSource>(&source)) {
        return sample_helmholtz(*coils, point);
    }
    return sample_rotating_dipole(std::get<DipoleActuator>(source), point, t);
}

} // namespace vasim::field
