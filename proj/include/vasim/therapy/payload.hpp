#pragma once

/// Payload and embolization kinetics: soluble seal, mode-dependent drug
/// release, coagulation in a sac, expandable-material swelling and the
/// resulting sac occlusion.
///
/// All updates integrate their linear ODE exactly over the step, so results do
/// not depend on how a fixed interval is split into steps.

#include "vasim/core/errors.hpp"
#include "vasim/spinner/modes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>

namespace vasim::therapy {

enum class Agent { ModelDye, Coagulant, None };

inline std::string_view to_string(Agent agent) {
    switch (agent) {
    case Agent::ModelDye: return "MODEL_DYE";
    case Agent::Coagulant: return "COAGULANT";
    case Agent::None: return "NONE";
    }
    return "NONE";
}

inline std::optional<Agent> agent_from_string(std::string_view name) {
    for (Agent a : {Agent::ModelDye, Agent::Coagulant, Agent::None}) {
        if (to_string(a) == name) return a;
    }
    return std::nullopt;
}

struct SealState {
    double integrity{1.0};
    double dissolution_time{30.0}; // s of immersion to dissolve fully

    friend bool operator==(const SealState&, const SealState&) = default;
};

inline void check_dt(double dt) {
    if (!(dt > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, "dt must be > 0");
    }
}

inline SealState seal_step(const SealState& seal, bool immersed, double dt) {
    check_dt(dt);
    SealState out = seal;
    if (immersed) {
        out.integrity = seal.integrity - dt / seal.dissolution_time;
        if (out.integrity < 1e-9) out.integrity = 0.0; // absorbs rounding from summing many small steps
    }
    return out;
}

struct ReleaseKinetics {
    /// 1 - exp(-7.5 / 2.5) = 0.95: flipping empties the cavity in 5-10 s.
    double tau_flip{2.5};
    double tau_spin{45.0};

    friend bool operator==(const ReleaseKinetics&, const ReleaseKinetics&) = default;
};

inline double release_time_constant(const ReleaseKinetics& kinetics, spinner::Mode mode) {
    switch (mode) {
    case spinner::Mode::Flip: return kinetics.tau_flip;
    case spinner::Mode::Spin: return kinetics.tau_spin;
    default: return std::numeric_limits<double>::infinity();
    }
}

struct PayloadState {
    Agent agent{Agent::None};
    double loaded_mass{}; // kg
    double released_fraction{};
    SealState seal{};
    ReleaseKinetics kinetics{};

    friend bool operator==(const PayloadState&, const PayloadState&) = default;
};

inline PayloadState release_step(const PayloadState& payload, spinner::Mode mode, double dt) {
    check_dt(dt);
    PayloadState out = payload;
    if (payload.seal.integrity > 0.0 || payload.agent == Agent::None) {
        return out;
    }
    const double tau = release_time_constant(payload.kinetics, mode);
    if (std::isinf(tau)) {
        return out;
    }
    const double remaining = (1.0 - payload.released_fraction) * std::exp(-dt / tau);
    out.released_fraction = std::clamp(1.0 - remaining, payload.released_fraction, 1.0);
    return out;
}

struct CoagulationParams {
    double k_clot{0.02}; // m³/(kg·s)
    double c_min{0.1};   // kg/m³
};

struct SwellParams {
    double coat_time{20.0};            // s immersed before the coat is gone
    double tau_swell{60.0};            // s
    double initial_volume_fraction{0.05}; // V0 / sac volume

    friend bool operator==(const SwellParams&, const SwellParams&) = default;
};

struct SacTherapyState {
    double agent_concentration{}; // kg/m³
    double clot_fraction{};
    double swell_volume{};        // m³
    bool coat_intact{true};
    double occlusion{};

    friend bool operator==(const SacTherapyState&, const SacTherapyState&) = default;
};

inline double occlusion_factor(const SacTherapyState& sac) { return sac.occlusion; }

inline double compute_occlusion(const SacTherapyState& sac, double sac_volume) {
    return std::clamp(std::max(sac.clot_fraction, sac.swell_volume / sac_volume), 0.0, 1.0);
}

/// Deposits `deposited_mass` into the sac, washes agent out at the exchange
/// rate, then advances the clot fraction with
/// dφ/dt = k·max(0, c - c_min)·(1 - φ).
inline SacTherapyState coagulation_step(const SacTherapyState& sac, double deposited_mass, double sac_volume,
                                        double exchange_flow, const CoagulationParams& params, double dt) {
    check_dt(dt);
    SacTherapyState out = sac;
    double c = sac.agent_concentration + std::max(0.0, deposited_mass) / sac_volume;
    c *= std::exp(-std::max(0.0, exchange_flow) / sac_volume * dt);
    out.agent_concentration = c;
    const double rate = params.k_clot * std::max(0.0, c - params.c_min);
    if (rate > 0.0 && sac.clot_fraction < 1.0) {
        out.clot_fraction = std::clamp(1.0 - (1.0 - sac.clot_fraction) * std::exp(-rate * dt), sac.clot_fraction, 1.0);
    }
    out.occlusion = std::max(sac.occlusion, compute_occlusion(out, sac_volume));
    return out;
}

/// Relaxes the swollen volume toward the sac volume once the coat is gone.
inline SacTherapyState swell_step(const SacTherapyState& sac, double sac_volume, const SwellParams& params, double dt) {
    check_dt(dt);
    SacTherapyState out = sac;
    if (sac.coat_intact) {
        return out;
    }
    const double v = sac_volume + (sac.swell_volume - sac_volume) * std::exp(-dt / params.tau_swell);
    out.swell_volume = std::clamp(v, sac.swell_volume, sac_volume);
    out.occlusion = std::max(sac.occlusion, compute_occlusion(out, sac_volume));
    return out;
}

/// Expandable polymer carried on the spinner behind a water-soluble coat.
struct ExpandableMaterial {
    SwellParams params{};
    double immersed_time{};

    [[nodiscard]] bool coat_intact() const { return immersed_time < params.coat_time; }

    friend bool operator==(const ExpandableMaterial&, const ExpandableMaterial&) = default;
};

} // namespace vasim::therapy
