#pragma once

#include "vasim/core/errors.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace vasim::spinner {

enum class Mode { Idle, Flip, Spin, StepOut, Captured };

inline std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::Idle: return "IDLE";
    case Mode::Flip: return "FLIP";
    case Mode::Spin: return "SPIN";
    case Mode::StepOut: return "STEP_OUT";
    case Mode::Captured: return "CAPTURED";
    }
    return "IDLE";
}

inline std::optional<Mode> mode_from_string(std::string_view name) {
    for (Mode m : {Mode::Idle, Mode::Flip, Mode::Spin, Mode::StepOut, Mode::Captured}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

/// Linear-through-origin mode boundaries in the (B, f) plane.
/// 3.6k rpm / 15 mT = 4000 Hz/T (flip -> spin), 7.2k rpm / 15 mT = 8000 Hz/T (step-out).
struct ModeCalibration {
    double flip_to_spin_slope{4000.0}; // Hz/T
    double step_out_slope{8000.0};     // Hz/T
    double minimum_field{2e-3};        // T

    void validate() const {
        if (!(flip_to_spin_slope > 0.0 && flip_to_spin_slope < step_out_slope)) {
            throw ValidationError(ValidationCode::OutOfRange, "mode calibration requires 0 < flip slope < step-out slope");
        }
        if (!(minimum_field >= 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "minimum field must be >= 0");
        }
    }
};

inline Mode classify_mode(double magnitude, double frequency, const ModeCalibration& calib = {}) {
    if (magnitude < calib.minimum_field || frequency == 0.0) return Mode::Idle;
    if (frequency <= calib.flip_to_spin_slope * magnitude) return Mode::Flip;
    if (frequency <= calib.step_out_slope * magnitude) return Mode::Spin;
    return Mode::StepOut;
}

} // namespace vasim::spinner
