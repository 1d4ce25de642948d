#pragma once

/// The fixed-timestep world update. Per step:
///   1. apply commands           5. advance spinner, route junctions
///   2. solve flow               6. aspiration
///   3. sample field             7. seal / release / coagulation / swelling
///   4. classify mode            8. emit events, tick += 1
/// `step` is a pure function of (world, commands, dt).

#include "vasim/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace vasim::sim {

inline void apply_command(WorldState& world, const Command& command) {
    if (const auto* set = std::get_if<SetField>(&command)) {
        if (auto* coils = std::get_if<field::HelmholtzSource>(&world.source)) {
            *coils = field::HelmholtzSource(set->axis, set->magnitude, set->frequency, set->sense);
        } else {
            auto& arm = std::get<field::DipoleActuator>(world.source);
            field::DipoleActuator next = arm;
            next.spin_axis = set->axis;
            next.frequency = set->frequency;
            next.sense = set->sense;
            arm = next.validated();
        }
    } else if (const auto* move = std::get_if<MoveArm>(&command)) {
        auto* arm = std::get_if<field::DipoleActuator>(&world.source);
        if (arm == nullptr) {
            throw CommandError("MOVE_ARM: this world has no robotic arm (field source is uniform coils)");
        }
        if (world.config->arm_slew_rate > 0.0) {
            const Vec3 base = world.arm_target.value_or(arm->position);
            world.arm_target = base + move->delta.translation;
            field::PoseDelta rotate_only = move->delta;
            rotate_only.translation = Vec3::Zero();
            *arm = field::move_actuator(*arm, rotate_only);
        } else {
            *arm = field::move_actuator(*arm, move->delta);
        }
    } else if (const auto* asp = std::get_if<SetAspiration>(&command)) {
        if (!world.sheath) {
            throw CommandError("TOGGLE_ASPIRATION: this world has no sheath");
        }
        world.sheath->aspiration_on = asp->on;
    }
}

namespace detail {

inline void slew_arm(WorldState& world, double dt) {
    auto* arm = std::get_if<field::DipoleActuator>(&world.source);
    if (arm == nullptr || !world.arm_target) return;
    const Vec3 delta = *world.arm_target - arm->position;
    const double max_step = world.config->arm_slew_rate * dt;
    if (delta.norm() <= max_step) {
        arm->position = *world.arm_target;
        world.arm_target.reset();
    } else {
        arm->position += delta.normalized() * max_step;
    }
}

/// Moves `from` up to `distance` along the shortest centerline path toward `target`.
inline vascular::Location move_toward(const vascular::VesselNetwork& net, vascular::Location from,
                                      const vascular::Location& target, double distance) {
    for (int guard = 0; guard < 64 && distance > 0.0; ++guard) {
        if (from.segment == target.segment) {
            const double gap = target.s - from.s;
            from.s += std::copysign(std::min(distance, std::abs(gap)), gap);
            return from;
        }
        const auto& seg = net.segment(from.segment);
        const double via_from = vascular::path_distance(net, {from.segment, 0.0}, target) + from.s;
        const double via_to = vascular::path_distance(net, {from.segment, seg.length}, target) + (seg.length - from.s);
        const bool forward = via_to < via_from;
        const double to_node = forward ? seg.length - from.s : from.s;
        if (distance < to_node) {
            from.s += forward ? distance : -distance;
            return from;
        }
        distance -= to_node;
        const int node_id = forward ? seg.to_node : seg.from_node;
        std::optional<vascular::Location> best;
        double best_d = 0.0;
        for (int seg_id : net.incident(node_id)) {
            if (seg_id == from.segment) continue;
            const auto& next = net.segment(seg_id);
            const vascular::Location entry{seg_id, next.from_node == node_id ? 0.0 : next.length};
            const double d = vascular::path_distance(net, entry, target);
            if (!best || d < best_d) {
                best = entry;
                best_d = d;
            }
        }
        if (!best) {
            from.s = forward ? seg.length : 0.0;
            return from;
        }
        from = *best;
    }
    return from;
}

template <typename Emit>
void aspirate(WorldState& world, double dt, Emit&& emit) {
    if (!world.sheath || !world.sheath->aspiration_on) return;
    auto& sp = world.spinner;
    if (sp.mode == Mode::Captured || sp.sac) return;
    const auto& net = world.network();
    const Sheath& sheath = *world.sheath;
    const vascular::Location here{sp.segment, sp.arc_s};
    double d = vascular::path_distance(net, here, sheath.tip);
    if (d > sheath.capture_radius) return;
    if (d > sheath.capture_distance) {
        const auto moved = move_toward(net, here, sheath.tip, sheath.aspiration_speed * dt);
        sp.segment = moved.segment;
        sp.arc_s = moved.s;
        sp.position = spinner::spinner_position(net, sp);
        d = vascular::path_distance(net, moved, sheath.tip);
        world.path_travel += sheath.aspiration_speed * dt;
    }
    if (d <= sheath.capture_distance) {
        const Mode before = sp.mode;
        sp.mode = Mode::Captured;
        sp.spin_frequency_actual = 0.0;
        Event e;
        e.kind = EventKind::Captured;
        e.segment = sp.segment;
        e.from_mode = before;
        e.to_mode = Mode::Captured;
        emit(e);
    }
}

} // namespace detail

/// Applies aspiration on its own (outside a full step), logging any capture.
inline WorldState aspiration_check(WorldState world) {
    detail::aspirate(world, world.dt, [&](Event e) {
        e.tick = world.tick;
        e.time = world.time();
        world.event_log.push_back(e);
    });
    return world;
}

inline StepResult step(WorldState world, std::span<const Command> commands, double dt) {
    if (!(dt > 0.0) || dt != world.dt) {
        throw ValidationError(ValidationCode::OutOfRange, "step dt must equal the world dt");
    }
    const auto& cfg = *world.config;
    const auto& net = world.network();
    const double t0 = world.time();
    std::vector<Event> events;
    auto emit = [&](Event e) {
        e.tick = world.tick + 1;
        e.time = static_cast<double>(world.tick + 1) * dt;
        events.push_back(e);
    };

    // 1. commands, applied atomically before anything else
    for (const auto& c : commands) {
        apply_command(world, c);
    }
    detail::slew_arm(world, dt);

    // 2. flow with current occlusions
    std::vector<double> occlusion(world.sacs.size());
    for (std::size_t j = 0; j < world.sacs.size(); ++j) {
        occlusion[j] = therapy::occlusion_factor(world.sacs[j]);
    }
    world.inflow = cfg.flow_enabled ? vascular::inflow_waveform(t0, net.inflow()) : 0.0;
    world.flow = vascular::solve_flow(net, cfg.resistances, world.inflow, occlusion, cfg.exchange);

    // 3-5. field, mode, translation and routing
    world.last_field = field::sample(world.source, world.spinner.position, t0);
    const spinner::SpinnerState before = world.spinner;
    if (before.mode != Mode::Captured) {
        auto outcome = spinner::advance_spinner(net, world.flow, before, cfg.spinner_spec, world.last_field, dt);
        world.spinner = outcome.state;
        const bool same_place = before.segment == world.spinner.segment && before.sac == world.spinner.sac;
        const double ds = same_place ? world.spinner.arc_s - before.arc_s : outcome.kinematics.rate * dt;
        world.signed_travel += ds;
        world.path_travel += std::abs(ds);
        if (world.spinner.mode != before.mode) {
            Event e;
            e.kind = EventKind::ModeChange;
            e.from_mode = before.mode;
            e.to_mode = world.spinner.mode;
            emit(e);
        }
        for (const auto& r : outcome.events) {
            Event e;
            e.kind = r.kind == spinner::RoutingEvent::Kind::JunctionTaken ? EventKind::JunctionTaken
                                                                           : EventKind::JunctionStall;
            e.segment = r.segment;
            e.node = r.node;
            emit(e);
        }
    }

    // 6. aspiration
    detail::aspirate(world, dt, emit);

    // 7. payload and therapy
    const bool immersed = world.spinner.mode != Mode::Captured;
    const double seal_before = world.payload.seal.integrity;
    if (world.payload.agent != therapy::Agent::None) {
        world.payload.seal = therapy::seal_step(world.payload.seal, immersed, dt);
    }
    if (seal_before > 0.0 && world.payload.seal.integrity == 0.0) {
        Event e;
        e.kind = EventKind::SealDissolved;
        emit(e);
    }
    const double released_before = world.payload.released_fraction;
    world.payload = therapy::release_step(world.payload, world.spinner.mode, dt);
    const double released_now = world.payload.released_fraction;
    if (released_before < kReleaseCompleteLevel && released_now >= kReleaseCompleteLevel) {
        Event e;
        e.kind = EventKind::ReleaseComplete;
        e.level = released_now;
        emit(e);
    }
    if (world.expandable && immersed) {
        world.expandable->immersed_time += dt;
    }
    for (std::size_t j = 0; j < world.sacs.size(); ++j) {
        const auto& sac_geom = net.sacs()[j];
        auto& sac = world.sacs[j];
        const bool spinner_here = world.spinner.sac && *world.spinner.sac == sac_geom.id;
        double deposit = 0.0;
        if (spinner_here && world.payload.agent == therapy::Agent::Coagulant) {
            deposit = world.payload.loaded_mass * (released_now - released_before);
        }
        sac = therapy::coagulation_step(sac, deposit, sac_geom.sac_volume, world.flow.sac_neck_flow[j],
                                        cfg.coagulation, dt);
        if (spinner_here && world.expandable) {
            const auto& material = *world.expandable;
            sac.swell_volume =
                std::max(sac.swell_volume, material.params.initial_volume_fraction * sac_geom.sac_volume);
            sac.coat_intact = material.coat_intact();
            sac.occlusion = std::max(sac.occlusion, therapy::compute_occlusion(sac, sac_geom.sac_volume));
            sac = therapy::swell_step(sac, sac_geom.sac_volume, material.params, dt);
        }
        for (double level : kOcclusionLevels) {
            if (sac.occlusion >= level && world.occlusion_reported[j] < level) {
                world.occlusion_reported[j] = level;
                Event e;
                e.kind = EventKind::SacOccluded;
                e.sac = sac_geom.id;
                e.level = level;
                emit(e);
            }
        }
    }

    // 8. events and time
    world.tick += 1;
    world.event_log.insert(world.event_log.end(), events.begin(), events.end());
    return {std::move(world), std::move(events)};
}

} // namespace vasim::sim
