#pragma once

/// The two long-running loops behind `serve` and `replay`.

#include "vasim/control/session.hpp"
#include "vasim/control/ws_server.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <ostream>
#include <thread>

namespace vasim::control {

using Clock = std::chrono::steady_clock;

struct LiveOptions {
    double speed{1.0};          // sim seconds per wall second
    double snapshot_rate{30.0}; // Hz
    const std::atomic<bool>* stop{nullptr};
    /// Upper bound on ticks run between two inbox polls, so a slow machine
    /// still answers frames promptly while it catches up.
    int max_ticks_per_poll{50};
};

/// Runs the session at wall-clock pace until `stop` is set. Every due tick
/// runs; when the loop falls behind, snapshots are skipped instead.
inline void run_live(SessionCore& core, WsServer& server, const LiveOptions& opts) {
    std::map<int, SessionCore::ClientId> clients; // transport id -> session id
    auto greeted_connections = [&] {
        std::vector<int> out;
        for (const auto& [conn, client] : clients) {
            if (core.greeted(client)) out.push_back(conn);
        }
        return out;
    };

    const auto snapshot_period = std::chrono::duration<double>(1.0 / opts.snapshot_rate);
    auto last_wall = Clock::now();
    auto last_snapshot = last_wall;
    double budget = 0.0; // sim seconds owed
    std::int64_t last_sent_tick = -1;

    while (opts.stop == nullptr || !opts.stop->load()) {
        for (auto& in : server.drain()) {
            switch (in.kind) {
            case Inbound::Kind::Connect: clients[in.connection] = core.connect(); break;
            case Inbound::Kind::Disconnect:
                if (auto it = clients.find(in.connection); it != clients.end()) {
                    core.disconnect(it->second);
                    clients.erase(it);
                }
                break;
            case Inbound::Kind::Message:
                if (auto it = clients.find(in.connection); it != clients.end()) {
                    server.send(in.connection, core.handle(it->second, in.text));
                }
                break;
            }
        }

        const auto now = Clock::now();
        const double wall = std::chrono::duration<double>(now - last_wall).count();
        last_wall = now;
        if (core.paused() || core.finished()) {
            budget = 0.0;
        } else {
            budget += wall * opts.speed;
        }
        int ran = 0;
        while (budget >= core.dt() && ran < opts.max_ticks_per_poll && core.advance()) {
            budget -= core.dt();
            ++ran;
        }

        const bool ended = core.take_end();
        if ((now - last_snapshot >= snapshot_period || ended) && core.session_tick() > last_sent_tick) {
            last_snapshot = now;
            last_sent_tick = core.session_tick();
            server.broadcast(greeted_connections(), snapshot_frame(core.snapshot()).dump(), !ended);
        }
        if (ended) {
            server.broadcast(greeted_connections(),
                             scenario_end_frame(core.session_tick(), core.world().time()).dump());
        }
        if (ran < opts.max_ticks_per_poll) std::this_thread::sleep_for(std::chrono::microseconds(500));
    }
}

// ---------------------------------------------------------------------------
// Replay

/// Snapshot for one recorded row. With a scenario the scene is rebuilt from
/// its network; markers straddle the recorded position.
inline Snapshot replay_snapshot(const sim::Trajectory& log, std::size_t index, const std::string& scenario_name,
                                const sim::WorldState* world) {
    const auto& row = log.rows.at(index);
    Snapshot s;
    s.tick = row.tick;
    s.time = row.time_s;
    s.scenario = scenario_name;
    s.row = row;
    s.sac_ids = log.sac_ids;
    const double prev_time = index > 0 ? log.rows[index - 1].time_s : 0.0;
    const Vec3 prev_pos = index > 0 ? log.rows[index - 1].position : row.position;
    if (row.time_s > prev_time) s.speed = (row.position - prev_pos).norm() / (row.time_s - prev_time);
    if (world != nullptr) {
        sim::WorldState w = *world;
        const auto& net = w.network();
        if (net.has_segment(row.segment)) {
            w.spinner.segment = row.segment;
            w.spinner.arc_s = row.s_m;
            w.spinner.sac.reset();
        }
        for (std::size_t j = 0; j < w.sacs.size() && j < row.occlusion.size(); ++j) w.sacs[j].occlusion = row.occlusion[j];
        auto scene = sim::fluoro_project(w, w.config->view);
        const Vec3 half = 0.5 * w.config->spinner_spec.body_length * spinner::spinner_axis(net, w.spinner);
        scene.markers = {sim::project(scene.view, row.position - half), sim::project(scene.view, row.position + half)};
        if (w.payload.agent != therapy::Agent::None) scene.payload_opacity = 1.0 - row.released;
        s.scene = std::move(scene);
    }
    return s;
}

struct ReplayOptions {
    double speed{1.0};
    std::string scenario_name;                 // reported in every snapshot
    const sim::WorldState* world{nullptr};     // optional, adds the scene
    const std::atomic<bool>* stop{nullptr};
};

/// Emits one SNAPSHOT per row at `time_s / speed` after the start, then a
/// SCENARIO_END frame. `emit` receives serialized frames.
inline void replay_log(const sim::Trajectory& log, const ReplayOptions& opts,
                       const std::function<void(const std::string&)>& emit) {
    const auto start = Clock::now();
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        if (opts.stop != nullptr && opts.stop->load()) return;
        const auto due = start + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(log.rows[i].time_s / opts.speed));
        std::this_thread::sleep_until(due);
        emit(snapshot_frame(replay_snapshot(log, i, opts.scenario_name, opts.world)).dump());
    }
    const std::int64_t tick = log.rows.empty() ? 0 : log.rows.back().tick;
    const double time = log.rows.empty() ? 0.0 : log.rows.back().time_s;
    emit(scenario_end_frame(tick, time).dump());
}

inline void replay_to_stream(const sim::Trajectory& log, const ReplayOptions& opts, std::ostream& out) {
    replay_log(log, opts, [&](const std::string& frame) { out << frame << '\n' << std::flush; });
}

/// Waits for the first greeted client, then streams the log to every greeted
/// client. Frames other than HELLO are answered with UNSUPPORTED: a replay
/// has no world to command.
inline void replay_to_server(const sim::Trajectory& log, const ReplayOptions& opts, WsServer& server) {
    std::map<int, bool> greeted;
    auto pump = [&] {
        for (auto& in : server.drain()) {
            if (in.kind == Inbound::Kind::Connect) {
                greeted[in.connection] = false;
            } else if (in.kind == Inbound::Kind::Disconnect) {
                greeted.erase(in.connection);
            } else {
                json reply;
                try {
                    const auto frame = parse_client_frame(in.text);
                    if (const auto* hello = std::get_if<Hello>(&frame.message)) {
                        if (hello->protocol_version == kProtocolVersion) {
                            greeted[in.connection] = true;
                            reply = hello_ack_frame({opts.scenario_name}, opts.scenario_name, false, 0, frame.seq);
                        } else {
                            reply = error_frame(ErrorCode::VersionMismatch, "server speaks vasim/1", frame.seq);
                        }
                    } else {
                        reply = error_frame(ErrorCode::Unsupported, frame.type + ": replay is read-only", frame.seq);
                    }
                } catch (const ProtocolError& e) {
                    reply = error_frame(e.code(), e.what(), e.seq());
                }
                server.send(in.connection, reply.dump());
            }
        }
    };
    auto targets = [&] {
        std::vector<int> out;
        for (const auto& [conn, ok] : greeted) {
            if (ok) out.push_back(conn);
        }
        return out;
    };
    while (targets().empty()) {
        if (opts.stop != nullptr && opts.stop->load()) return;
        pump();
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    replay_log(log, opts, [&](const std::string& frame) {
        pump();
        server.broadcast(targets(), frame);
    });
}

} // namespace vasim::control
