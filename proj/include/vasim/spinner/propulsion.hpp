#pragma once

/// Affine swim-speed law v = max(0, a·f + c) and its least-squares calibration
/// from (spin frequency, speed) measurements.

#include "vasim/core/errors.hpp"
#include "vasim/core/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace vasim::spinner {

struct PropulsionFit {
    double slope{};     // (m/s) per Hz
    double intercept{}; // m/s
};

struct SpeedSample {
    double frequency{}; // Hz
    double speed{};     // m/s
};

/// Straight-tube anchors for the 2.5 mm OD spinner in a 3.5 mm ID tube:
/// 2k rpm (CFD), 8.4k rpm (experiment), 30k rpm (CFD).
inline std::vector<SpeedSample> reference_anchors() {
    return {{units::rpm_to_hz(2000.0), 0.026}, {units::rpm_to_hz(8400.0), 0.145}, {units::rpm_to_hz(30000.0), 0.586}};
}

/// Ordinary least squares over (f, v). Needs at least two distinct frequencies.
inline PropulsionFit calibrate_propulsion(const std::vector<SpeedSample>& samples) {
    std::set<double> distinct;
    for (const auto& s : samples) {
        if (!std::isfinite(s.frequency) || !std::isfinite(s.speed)) {
            throw ValidationError(ValidationCode::OutOfRange, "calibration samples must be finite");
        }
        distinct.insert(s.frequency);
    }
    if (samples.size() < 2) {
        throw ValidationError(ValidationCode::InsufficientSamples, "calibration needs at least 2 samples");
    }
    if (distinct.size() < 2) {
        throw ValidationError(ValidationCode::InsufficientSamples,
                              "calibration needs at least 2 distinct spin frequencies");
    }
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd speed(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = samples[static_cast<std::size_t>(i)].frequency;
        design(i, 1) = 1.0;
        speed(i) = samples[static_cast<std::size_t>(i)].speed;
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(speed);
    PropulsionFit fit{coef(0), coef(1)};
    if (!(fit.slope > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, "calibrated slope must be positive");
    }
    return fit;
}

inline PropulsionFit default_propulsion_fit() {
    static const PropulsionFit fit = calibrate_propulsion(reference_anchors());
    return fit;
}

inline double propulsion_speed(double frequency, const PropulsionFit& fit) {
    return std::max(0.0, fit.slope * frequency + fit.intercept);
}

/// Peak suction speed at the front opening; linear through the 6.0 cm/s at
/// 2k rpm measurement. Diagnostic only.
inline double suction_speed(double frequency) {
    constexpr double kSuctionPerHz = 0.060 / (2000.0 / 60.0);
    return kSuctionPerHz * std::max(0.0, frequency);
}

struct CalibrationReport {
    PropulsionFit fit;
    std::vector<double> residuals; // predicted - measured, m/s
    double max_abs_residual{};
};

inline CalibrationReport calibration_report(const std::vector<SpeedSample>& samples) {
    CalibrationReport report;
    report.fit = calibrate_propulsion(samples);
    for (const auto& s : samples) {
        const double r = report.fit.slope * s.frequency + report.fit.intercept - s.speed;
        report.residuals.push_back(r);
        report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r));
    }
    return report;
}

/// Rows of `rpm,speed_cm_per_s`. A non-numeric first line is taken as a
/// header; blank lines and '#' comments are skipped.
inline std::vector<SpeedSample> parse_anchor_csv(std::string_view text) {
    std::vector<SpeedSample> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const bool may_be_header = first_content;
        first_content = false;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            if (may_be_header) continue;
            throw ParseError("calibration CSV line " + std::to_string(line_no) + ": expected 'rpm,speed_cm_per_s'");
        }
        double rpm = 0.0;
        double speed = 0.0;
        try {
            std::size_t used_a = 0;
            std::size_t used_b = 0;
            const std::string a = line.substr(0, comma);
            const std::string b = line.substr(comma + 1);
            rpm = std::stod(a, &used_a);
            speed = std::stod(b, &used_b);
            if (a.find_first_not_of(" \t", used_a) != std::string::npos ||
                b.find_first_not_of(" \t", used_b) != std::string::npos) {
                throw std::invalid_argument("trailing text");
            }
        } catch (const std::exception&) {
            if (may_be_header) continue; // header row
            throw ParseError("calibration CSV line " + std::to_string(line_no) + ": non-numeric value");
        }
        out.push_back({units::rpm_to_hz(rpm), speed * units::cm_per_s});
    }
    return out;
}

} // namespace vasim::spinner
