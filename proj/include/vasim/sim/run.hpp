#pragma once

/// Batch execution of a scenario: scripted commands, trajectory rows after
/// every step, the event list and summary metrics.

#include "vasim/sim/log_io.hpp"
#include "vasim/sim/scenario.hpp"
#include "vasim/sim/step.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace vasim::sim {

struct Metrics {
    double net_displacement{}; // signed arc length travelled, m
    double euclidean_displacement{};
    double path_length{};      // Σ |ds|, m
    double mean_speed{};       // path_length / duration, m/s
    std::optional<double> time_to_target;
    double released_fraction{};
    std::map<int, double> sac_occlusion;
    bool captured{};
    std::optional<double> capture_time;
    double max_flow_residual{}; // max over steps of |node residual| / Q̄
};

inline json metrics_to_json(const Metrics& m, const std::vector<std::string>& selected = metric_names()) {
    auto wants = [&](const char* name) { return std::find(selected.begin(), selected.end(), name) != selected.end(); };
    json j = json::object();
    if (wants("net_displacement")) {
        j["net_displacement_m"] = m.net_displacement;
        j["euclidean_displacement_m"] = m.euclidean_displacement;
    }
    if (wants("path_length")) j["path_length_m"] = m.path_length;
    if (wants("mean_speed")) j["mean_speed_m_s"] = m.mean_speed;
    if (wants("time_to_target")) j["time_to_target_s"] = m.time_to_target ? json(*m.time_to_target) : json(nullptr);
    if (wants("released_fraction")) j["released_fraction"] = m.released_fraction;
    if (wants("sac_occlusion")) {
        json occ = json::object();
        for (const auto& [id, v] : m.sac_occlusion) occ[std::to_string(id)] = v;
        j["sac_occlusion"] = occ;
    }
    if (wants("captured")) {
        j["captured"] = m.captured;
        j["capture_time_s"] = m.capture_time ? json(*m.capture_time) : json(nullptr);
    }
    if (wants("max_flow_residual")) j["max_flow_residual_rel"] = m.max_flow_residual;
    return j;
}

struct RunOutput {
    Trajectory trajectory;
    std::vector<Event> events;
    Metrics metrics;
    WorldState final_world;
};

/// Called after every step with the new world and the events it emitted.
using StepObserver = std::function<void(const WorldState&, const std::vector<Event>&)>;

/// First tick whose step applies a command scheduled at `t`.
inline std::int64_t command_tick(double t, double dt) {
    return static_cast<std::int64_t>(std::ceil(t / dt - 1e-9));
}

inline RunOutput run_scenario(const Scenario& sc, const StepObserver& observer = {}) {
    WorldState world = build_world(sc);
    const auto& net = *sc.network;
    const std::int64_t n_steps = sc.step_count();
    const Vec3 start = world.spinner.position;
    const double q_ref = net.inflow().mean_flow;

    RunOutput out;
    for (const auto& sac : net.sacs()) out.trajectory.sac_ids.push_back(sac.id);
    out.trajectory.rows.reserve(static_cast<std::size_t>(n_steps));

    std::size_t next_command = 0;
    std::vector<Command> pending;
    for (std::int64_t k = 0; k < n_steps; ++k) {
        pending.clear();
        while (next_command < sc.commands.size() && command_tick(sc.commands[next_command].time, sc.dt) <= k) {
            pending.push_back(sc.commands[next_command++].command);
        }
        auto result = step(std::move(world), pending, sc.dt);
        world = std::move(result.world);

        auto& m = out.metrics;
        m.max_flow_residual =
            std::max(m.max_flow_residual, vascular::max_conservation_residual(net, world.flow, world.inflow) / q_ref);
        if (!m.time_to_target && sc.target && !world.spinner.sac &&
            vascular::path_distance(net, {world.spinner.segment, world.spinner.arc_s}, sc.target->location) <=
                sc.target->tolerance) {
            m.time_to_target = world.time();
        }
        for (const auto& e : result.events) {
            if (e.kind == EventKind::Captured && !m.captured) {
                m.captured = true;
                m.capture_time = e.time;
            }
        }
        out.trajectory.rows.push_back(make_row(world));
        if (observer) observer(world, result.events);
    }

    Event end;
    end.kind = EventKind::ScenarioEnd;
    end.tick = world.tick;
    end.time = world.time();
    world.event_log.push_back(end);

    auto& m = out.metrics;
    m.net_displacement = world.signed_travel;
    m.euclidean_displacement = (world.spinner.position - start).norm();
    m.path_length = world.path_travel;
    m.mean_speed = world.path_travel / (static_cast<double>(n_steps) * sc.dt);
    m.released_fraction = world.payload.released_fraction;
    for (std::size_t j = 0; j < net.sacs().size(); ++j) {
        m.sac_occlusion[net.sacs()[j].id] = world.sacs[j].occlusion;
    }
    out.events = world.event_log;
    out.final_world = std::move(world);
    return out;
}

} // namespace vasim::sim
