#pragma once

/// Transport-independent teleoperation session. Owns the one authoritative
/// world; every inbound frame produces exactly one reply frame (HELLO_ACK,
/// ACK or ERROR). World commands are queued and applied atomically at the
/// next step boundary.

#include "vasim/control/protocol.hpp"
#include "vasim/sim/run.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vasim::control {

namespace fs = std::filesystem;

struct CatalogEntry {
    std::string name;
    fs::path path;
};

/// Every *.json scenario in `dir`, sorted by name.
inline std::vector<CatalogEntry> scan_catalog(const fs::path& dir) {
    std::vector<CatalogEntry> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw IoError("scenario directory '" + dir.string() + "' does not exist");
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            out.push_back({entry.path().stem().string(), entry.path()});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

class SessionCore {
  public:
    using ClientId = int;

    SessionCore(std::vector<CatalogEntry> catalog, const std::string& initial) : catalog_(std::move(catalog)) {
        const auto* entry = find(initial);
        if (entry == nullptr) {
            throw ValidationError(ValidationCode::DanglingReference, "unknown scenario '" + initial + "'");
        }
        load(*entry);
    }

    ClientId connect() {
        const ClientId id = next_client_++;
        clients_.insert(id);
        return id;
    }

    void disconnect(ClientId id) {
        clients_.erase(id);
        greeted_.erase(id);
        if (token_ == id) token_.reset();
    }

    /// Handles one inbound text frame and returns the serialized reply.
    std::string handle(ClientId client, std::string_view text) { return handle_json(client, text).dump(); }

    json handle_json(ClientId client, std::string_view text) {
        ClientFrame frame;
        try {
            frame = parse_client_frame(text);
        } catch (const ProtocolError& e) {
            return error_frame(e.code(), e.what(), e.seq());
        }
        const auto seq = frame.seq;
        if (const auto* hello = std::get_if<Hello>(&frame.message)) {
            if (hello->protocol_version != kProtocolVersion) {
                return error_frame(ErrorCode::VersionMismatch,
                                   "server speaks " + std::string(kProtocolVersion) + ", client sent " +
                                       hello->protocol_version,
                                   seq);
            }
            greeted_.insert(client);
            if (!token_) token_ = client;
            return hello_ack_frame(scenario_names(), scenario_.name, token_ == client, session_tick(), seq);
        }
        if (greeted_.count(client) == 0) {
            return error_frame(ErrorCode::NoHandshake, "send HELLO first", seq);
        }
        if (std::holds_alternative<RequestToken>(frame.message)) {
            if (token_ && *token_ != client) return error_frame(ErrorCode::TokenHeld, "another client holds the token", seq);
            token_ = client;
            return ack_frame(frame.type, session_tick(), seq);
        }
        if (std::holds_alternative<ReleaseToken>(frame.message)) {
            if (token_ != client) return error_frame(ErrorCode::NotTokenHolder, "this client does not hold the token", seq);
            token_.reset();
            return ack_frame(frame.type, session_tick(), seq);
        }
        if (token_ != client) {
            return error_frame(ErrorCode::NotTokenHolder, frame.type + " needs the command token", seq);
        }
        if (const auto* cmd = std::get_if<WorldCommand>(&frame.message)) {
            if (std::holds_alternative<sim::MoveArm>(cmd->command) &&
                !std::holds_alternative<field::DipoleActuator>(world_.source)) {
                return error_frame(ErrorCode::Unsupported, "MOVE_ARM: this scenario uses uniform coils, not an arm", seq);
            }
            if (std::holds_alternative<sim::SetAspiration>(cmd->command) && !world_.sheath) {
                return error_frame(ErrorCode::Unsupported, "TOGGLE_ASPIRATION: this scenario has no sheath", seq);
            }
            pending_.push_back(cmd->command);
            return ack_frame(frame.type, session_tick(), seq);
        }
        if (const auto* pause = std::get_if<Pause>(&frame.message)) {
            paused_ = pause->on;
            return ack_frame(frame.type, session_tick(), seq);
        }
        if (const auto* select = std::get_if<SelectScenario>(&frame.message)) {
            const auto* entry = find(select->name);
            if (entry == nullptr) {
                return error_frame(ErrorCode::UnknownScenario, "no scenario named '" + select->name + "'", seq);
            }
            try {
                load(*entry);
            } catch (const Error& e) {
                return error_frame(ErrorCode::SchemaViolation, e.what(), seq);
            }
            return ack_frame(frame.type, session_tick(), seq);
        }
        // RESET
        load_current();
        return ack_frame(frame.type, session_tick(), seq);
    }

    /// Advances one tick unless paused or finished. Returns false when no step ran.
    bool advance() {
        if (paused_ || finished()) return false;
        std::vector<sim::Command> commands;
        while (next_script_ < scenario_.commands.size() &&
               sim::command_tick(scenario_.commands[next_script_].time, scenario_.dt) <= world_.tick) {
            commands.push_back(scenario_.commands[next_script_++].command);
        }
        commands.insert(commands.end(), pending_.begin(), pending_.end());
        pending_.clear();
        auto result = sim::step(std::move(world_), commands, scenario_.dt);
        world_ = std::move(result.world);
        unsent_events_.insert(unsent_events_.end(), result.events.begin(), result.events.end());
        return true;
    }

    [[nodiscard]] bool finished() const { return world_.tick >= scenario_.step_count(); }

    /// True exactly once per scenario run, when it first reaches its duration.
    bool take_end() {
        if (finished() && !end_reported_) {
            end_reported_ = true;
            return true;
        }
        return false;
    }

    /// Snapshot with the events emitted since the previous call.
    Snapshot snapshot() {
        const double elapsed = static_cast<double>(world_.tick - last_snapshot_tick_) * scenario_.dt;
        const double speed = elapsed > 0.0 ? (world_.path_travel - last_snapshot_travel_) / elapsed : 0.0;
        last_snapshot_tick_ = world_.tick;
        last_snapshot_travel_ = world_.path_travel;
        auto events = std::move(unsent_events_);
        unsent_events_.clear();
        auto snap = make_snapshot(world_, scenario_.name, paused_, speed, std::move(events));
        snap.tick = session_tick();
        return snap;
    }

    /// Monotonic across RESET and SELECT_SCENARIO (the world tick restarts at 0).
    [[nodiscard]] std::int64_t session_tick() const { return tick_base_ + world_.tick; }

    [[nodiscard]] const sim::WorldState& world() const { return world_; }
    [[nodiscard]] const sim::Scenario& scenario() const { return scenario_; }
    [[nodiscard]] bool paused() const { return paused_; }
    [[nodiscard]] bool greeted(ClientId id) const { return greeted_.count(id) != 0; }
    [[nodiscard]] std::optional<ClientId> token_holder() const { return token_; }
    [[nodiscard]] std::size_t client_count() const { return clients_.size(); }
    [[nodiscard]] double dt() const { return scenario_.dt; }

    [[nodiscard]] std::vector<std::string> scenario_names() const {
        std::vector<std::string> names;
        for (const auto& e : catalog_) names.push_back(e.name);
        return names;
    }

  private:
    const CatalogEntry* find(const std::string& name) const {
        for (const auto& e : catalog_) {
            if (e.name == name) return &e;
        }
        return nullptr;
    }

    void load(const CatalogEntry& entry) {
        scenario_ = sim::load_scenario_file(entry.path.string());
        scenario_.name = entry.name;
        load_current();
    }

    void load_current() {
        tick_base_ = loaded_ ? session_tick() + 1 : 0;
        loaded_ = true;
        world_ = sim::build_world(scenario_);
        pending_.clear();
        unsent_events_.clear();
        next_script_ = 0;
        end_reported_ = false;
        last_snapshot_tick_ = 0;
        last_snapshot_travel_ = 0.0;
    }

    std::vector<CatalogEntry> catalog_;
    sim::Scenario scenario_;
    sim::WorldState world_;
    std::vector<sim::Command> pending_;
    std::vector<sim::Event> unsent_events_;
    std::size_t next_script_{0};
    bool paused_{false};
    bool end_reported_{false};
    std::int64_t last_snapshot_tick_{0};
    std::int64_t tick_base_{0};
    bool loaded_{false};
    double last_snapshot_travel_{0.0};
    std::set<ClientId> clients_;
    std::set<ClientId> greeted_;
    std::optional<ClientId> token_;
    ClientId next_client_{1};
};

} // namespace vasim::control
