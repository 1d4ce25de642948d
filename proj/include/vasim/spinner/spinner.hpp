#pragma once

/// Spinner kinematics on the vessel graph: quasi-steady translation from
/// propulsion plus flow advection, branch selection at junctions, and entry
/// into / exit from aneurysm sacs.

#include "vasim/core/errors.hpp"
#include "vasim/core/types.hpp"
#include "vasim/field/sources.hpp"
#include "vasim/spinner/modes.hpp"
#include "vasim/spinner/propulsion.hpp"
#include "vasim/vascular/flow.hpp"
#include "vasim/vascular/network.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace vasim::spinner {

struct SpinnerSpec {
    double outer_diameter{2.5e-3};
    double body_length{4e-3};
    int helix_handedness{1};
    double magnet_moment{4e-4}; // A·m², three small NdFeB cubes
    PropulsionFit propulsion{default_propulsion_fit()};
    double flow_coupling{1.0};
    double idle_coupling{1.0};
    ModeCalibration modes{};
    double alignment_cutoff{kPi / 3.0};

    void validate() const {
        if (!(outer_diameter > 0.0) || !(body_length > 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "spinner diameter and length must be > 0");
        }
        if (helix_handedness != 1 && helix_handedness != -1) {
            throw ValidationError(ValidationCode::OutOfRange, "helix handedness must be +1 or -1");
        }
        if (!(flow_coupling >= 0.0 && flow_coupling <= 1.0) || !(idle_coupling >= 0.0 && idle_coupling <= 1.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "flow couplings must lie in [0, 1]");
        }
        if (!(alignment_cutoff > 0.0 && alignment_cutoff <= kPi / 2.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "alignment cutoff must lie in (0, pi/2]");
        }
        if (!(propulsion.slope > 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "propulsion slope must be > 0");
        }
        modes.validate();
    }
};

struct SpinnerState {
    int segment{};
    double arc_s{};
    Mode mode{Mode::Idle};
    int travel_sign{1};
    Vec3 position{Vec3::Zero()};
    double spin_frequency_actual{};
    /// Set while the spinner sits inside an aneurysm sac compartment.
    std::optional<int> sac;
    /// Set while held at a junction that refused every branch.
    bool junction_stalled{false};

    friend bool operator==(const SpinnerState&, const SpinnerState&) = default;
};

inline Vec3 spinner_position(const vascular::VesselNetwork& net, const SpinnerState& state) {
    if (state.sac) {
        return vascular::sac_center(net, net.sac(*state.sac));
    }
    return vascular::segment_frame(net, state.segment, state.arc_s).point;
}

/// Body axis used for display: the sac normal inside a sac, else the vessel tangent.
inline Vec3 spinner_axis(const vascular::VesselNetwork& net, const SpinnerState& state) {
    if (state.sac) {
        return net.sac(*state.sac).normal;
    }
    return vascular::segment_frame(net, state.segment, state.arc_s).tangent;
}

struct Kinematics {
    Mode mode{Mode::Idle};
    double propulsion{};  // m/s along the tangent
    double advection{};   // m/s along the tangent
    double rate{};        // propulsion + advection
    int travel_sign{1};
    bool stalled{false};  // SPIN but misaligned beyond the cutoff
    Vec3 thrust_direction{Vec3::Zero()};
};

/// ds/dt along `tangent` for the spinner in `state` under `field` with local
/// mean flow velocity `u_local` (signed along the same tangent).
inline Kinematics translation_rate(const SpinnerState& state, const SpinnerSpec& spec, const field::FieldSample& field,
                                   double u_local, const Vec3& tangent) {
    Kinematics k;
    k.travel_sign = state.travel_sign;
    if (state.mode == Mode::Captured) {
        k.mode = Mode::Captured;
        return k;
    }
    k.mode = classify_mode(field.magnitude, field.frequency, spec.modes);
    k.thrust_direction = static_cast<double>(spec.helix_handedness * field.sense) * field.rotation_axis;
    if (k.mode == Mode::Spin) {
        const double alignment = field.rotation_axis.dot(tangent);
        if (alignment != 0.0) {
            k.travel_sign = spec.helix_handedness * field.sense * (alignment > 0.0 ? 1 : -1);
        }
        if (std::abs(alignment) < std::cos(spec.alignment_cutoff)) {
            k.stalled = true;
        } else {
            k.propulsion = k.travel_sign * propulsion_speed(field.frequency, spec.propulsion) * std::abs(alignment);
        }
        k.advection = spec.flow_coupling * u_local;
    } else {
        k.advection = spec.idle_coupling * u_local;
    }
    k.rate = k.propulsion + k.advection;
    return k;
}

struct BranchCandidate {
    int segment{};
    Vec3 tangent; // unit, pointing away from the junction
};

/// Candidate best aligned with `direction`; nullopt (stall) if even the best
/// is further than `cutoff` away. Ties go to the lowest segment id.
inline std::optional<int> choose_branch(const std::vector<BranchCandidate>& candidates, const Vec3& direction,
                                        double cutoff) {
    if (candidates.empty()) {
        throw ValidationError(ValidationCode::OutOfRange, "choose_branch needs at least one candidate");
    }
    constexpr double kTieTol = 1e-12;
    const Vec3 d = direction.normalized();
    const BranchCandidate* best = nullptr;
    double best_dot = -2.0;
    for (const auto& c : candidates) {
        const double dot = d.dot(c.tangent.normalized());
        if (best == nullptr || dot > best_dot + kTieTol ||
            (std::abs(dot - best_dot) <= kTieTol && c.segment < best->segment)) {
            best = &c;
            best_dot = dot;
        }
    }
    if (best_dot < std::cos(cutoff)) {
        return std::nullopt;
    }
    return best->segment;
}

struct RoutingEvent {
    enum class Kind { JunctionTaken, JunctionStall };
    Kind kind{};
    int segment{}; // taken segment (or the segment held at for a stall)
    int node{};
};

struct AdvanceOutcome {
    SpinnerState state;
    Kinematics kinematics;
    std::vector<RoutingEvent> events;
};

namespace detail {

inline std::vector<BranchCandidate> junction_candidates(const vascular::VesselNetwork& net, int node_id,
                                                        int arriving_segment) {
    std::vector<BranchCandidate> out;
    for (int seg_id : net.incident(node_id)) {
        if (seg_id == arriving_segment) continue;
        const auto& seg = net.segment(seg_id);
        if (seg.from_node == node_id) {
            out.push_back({seg_id, vascular::segment_frame(net, seg_id, 0.0).tangent});
        } else {
            out.push_back({seg_id, -vascular::segment_frame(net, seg_id, seg.length).tangent});
        }
    }
    return out;
}

/// Passive routing follows the strongest outflow from the junction.
inline std::optional<int> passive_branch(const vascular::VesselNetwork& net, const vascular::FlowField& flow,
                                         int node_id, const std::vector<BranchCandidate>& candidates) {
    std::optional<int> best;
    double best_out = 0.0;
    for (const auto& c : candidates) {
        const auto& seg = net.segment(c.segment);
        const double q = flow.segment_flow.at(net.segment_index(c.segment));
        const double outflow = seg.from_node == node_id ? q : -q;
        if (outflow > best_out) {
            best_out = outflow;
            best = c.segment;
        }
    }
    return best;
}

} // namespace detail

/// One explicit step of length `dt`. Crossing a segment end routes through the
/// junction: thrust direction decides while propulsion drives the motion,
/// otherwise the spinner follows the dominant outflow.
inline AdvanceOutcome advance_spinner(const vascular::VesselNetwork& net, const vascular::FlowField& flow,
                                      const SpinnerState& state, const SpinnerSpec& spec,
                                      const field::FieldSample& field, double dt) {
    if (!(dt > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, "dt must be > 0");
    }
    AdvanceOutcome out{state, {}, {}};
    SpinnerState& next = out.state;
    if (state.mode == Mode::Captured) {
        out.kinematics.mode = Mode::Captured;
        return out;
    }
    const double cutoff_cos = std::cos(spec.alignment_cutoff);

    if (state.sac) {
        const auto& sac = net.sac(*state.sac);
        out.kinematics = translation_rate(state, spec, field, 0.0, sac.normal);
        next.mode = out.kinematics.mode;
        next.spin_frequency_actual = next.mode == Mode::Spin || next.mode == Mode::Flip ? field.frequency : 0.0;
        if (next.mode == Mode::Spin && out.kinematics.thrust_direction.dot(-sac.normal) >= cutoff_cos) {
            next.sac.reset();
            next.segment = sac.host_segment;
            next.arc_s = sac.arc_position;
        }
        next.position = spinner_position(net, next);
        return out;
    }

    const auto here = vascular::segment_frame(net, state.segment, state.arc_s);
    const double u = vascular::local_velocity(net, flow, state.segment, state.arc_s);
    const Kinematics kin = translation_rate(state, spec, field, u, here.tangent);
    out.kinematics = kin;
    next.mode = kin.mode;
    next.travel_sign = kin.travel_sign;
    switch (kin.mode) {
    case Mode::Spin:
    case Mode::Flip: next.spin_frequency_actual = field.frequency; break;
    case Mode::StepOut: next.spin_frequency_actual = spec.modes.step_out_slope * field.magnitude; break;
    default: next.spin_frequency_actual = 0.0; break;
    }

    // Sac entry: at the neck with the thrust pointing into the sac more than along the vessel.
    if (kin.mode == Mode::Spin) {
        for (const auto& sac : net.sacs()) {
            if (sac.host_segment != state.segment || std::abs(state.arc_s - sac.arc_position) > sac.neck_radius) {
                continue;
            }
            const double into = kin.thrust_direction.dot(sac.normal);
            if (into >= cutoff_cos && into > std::abs(kin.thrust_direction.dot(here.tangent))) {
                next.sac = sac.id;
                next.junction_stalled = false;
                next.position = spinner_position(net, next);
                return out;
            }
        }
    }

    const double ds = kin.rate * dt;
    double s = state.arc_s + ds;
    const bool thrust_routes = kin.mode == Mode::Spin && !kin.stalled && kin.propulsion != 0.0 &&
                               (kin.propulsion > 0.0) == (ds > 0.0);
    bool held = false;
    for (int guard = 0; guard < 64; ++guard) {
        const auto& seg = net.segment(next.segment);
        if (s >= 0.0 && s <= seg.length) break;
        const bool forward = s > seg.length;
        const int node_id = forward ? seg.to_node : seg.from_node;
        const double overshoot = forward ? s - seg.length : -s;
        const auto candidates = detail::junction_candidates(net, node_id, next.segment);
        if (candidates.empty()) {
            s = forward ? seg.length : 0.0; // vessel end: rest against it
            break;
        }
        const auto choice = thrust_routes ? choose_branch(candidates, kin.thrust_direction, spec.alignment_cutoff)
                                          : detail::passive_branch(net, flow, node_id, candidates);
        if (!choice) {
            s = forward ? seg.length : 0.0;
            if (!state.junction_stalled) {
                out.events.push_back({RoutingEvent::Kind::JunctionStall, next.segment, node_id});
            }
            held = true;
            break;
        }
        const auto& entered = net.segment(*choice);
        next.segment = *choice;
        s = entered.from_node == node_id ? std::min(overshoot, entered.length)
                                         : std::max(0.0, entered.length - overshoot);
        out.events.push_back({RoutingEvent::Kind::JunctionTaken, *choice, node_id});
    }
    next.arc_s = s;
    next.junction_stalled = held || (state.junction_stalled && s == state.arc_s && next.segment == state.segment);
    next.position = spinner_position(net, next);
    return out;
}

} // namespace vasim::spinner
