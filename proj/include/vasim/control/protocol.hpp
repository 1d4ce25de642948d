#pragma once

/// "vasim/1" wire protocol: one JSON object per WebSocket text frame, with a
/// "type" discriminator. Clinical units on the wire (mT, rpm, mm); the
/// conversion to SI happens here and nowhere else.

#include "vasim/core/errors.hpp"
#include "vasim/core/json_util.hpp"
#include "vasim/sim/fluoro.hpp"
#include "vasim/sim/log_io.hpp"
#include "vasim/sim/scenario.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vasim::control {

using json_util::json;

inline constexpr std::string_view kProtocolVersion = "vasim/1";

enum class ErrorCode {
    ParseError,
    SchemaViolation,
    UnknownType,
    RangeViolation,
    VersionMismatch,
    NoHandshake,
    NotTokenHolder,
    TokenHeld,
    UnknownScenario,
    Unsupported,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::SchemaViolation: return "SCHEMA_VIOLATION";
    case ErrorCode::UnknownType: return "UNKNOWN_TYPE";
    case ErrorCode::RangeViolation: return "RANGE_VIOLATION";
    case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::NoHandshake: return "NO_HANDSHAKE";
    case ErrorCode::NotTokenHolder: return "NOT_TOKEN_HOLDER";
    case ErrorCode::TokenHeld: return "TOKEN_HELD";
    case ErrorCode::UnknownScenario: return "UNKNOWN_SCENARIO";
    case ErrorCode::Unsupported: return "UNSUPPORTED";
    }
    return "PARSE_ERROR";
}

class ProtocolError : public std::runtime_error {
  public:
    ProtocolError(ErrorCode code, const std::string& what, std::optional<std::int64_t> seq = std::nullopt)
        : std::runtime_error(what), code_(code), seq_(seq) {}
    [[nodiscard]] ErrorCode code() const { return code_; }
    [[nodiscard]] std::optional<std::int64_t> seq() const { return seq_; }

  private:
    ErrorCode code_;
    std::optional<std::int64_t> seq_;
};

// ---------------------------------------------------------------------------
// Client -> server

struct Hello {
    std::string protocol_version;
};
struct WorldCommand {
    sim::Command command;
};
struct Pause {
    bool on{};
};
struct SelectScenario {
    std::string name;
};
struct Reset {};
struct RequestToken {};
struct ReleaseToken {};

using ClientMessage = std::variant<Hello, WorldCommand, Pause, SelectScenario, Reset, RequestToken, ReleaseToken>;

struct ClientFrame {
    std::string type;
    std::optional<std::int64_t> seq; // echoed in the reply when present
    ClientMessage message;
};

/// Parses one inbound frame. Throws ProtocolError with the code to report.
inline ClientFrame parse_client_frame(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ProtocolError(ErrorCode::ParseError, std::string("frame is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ProtocolError(ErrorCode::SchemaViolation, "frame must be a JSON object");
    }
    std::optional<std::int64_t> seq;
    if (auto it = j.find("seq"); it != j.end()) {
        if (!it->is_number_integer()) throw ProtocolError(ErrorCode::SchemaViolation, "seq must be an integer");
        seq = it->get<std::int64_t>();
    }
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) {
        throw ProtocolError(ErrorCode::SchemaViolation, "frame needs a string 'type'", seq);
    }
    ClientFrame frame;
    frame.type = type_it->get<std::string>();
    frame.seq = seq;
    const std::string& type = frame.type;
    try {
        auto only = [&](std::vector<std::string_view> keys) {
            keys.push_back("type");
            keys.push_back("seq");
            sim::detail::check_keys(j, keys, type);
        };
        if (type == "HELLO") {
            only({"protocol_version"});
            frame.message = Hello{json_util::require<std::string>(j, "protocol_version", type)};
        } else if (type == "SET_FIELD" || type == "MOVE_ARM" || type == "TOGGLE_ASPIRATION") {
            frame.message = WorldCommand{sim::command_from_json(j, type, {"seq"})};
        } else if (type == "PAUSE") {
            only({"on"});
            frame.message = Pause{json_util::require<bool>(j, "on", type)};
        } else if (type == "SELECT_SCENARIO") {
            only({"name"});
            frame.message = SelectScenario{json_util::require<std::string>(j, "name", type)};
        } else if (type == "RESET") {
            only({});
            frame.message = Reset{};
        } else if (type == "REQUEST_TOKEN") {
            only({});
            frame.message = RequestToken{};
        } else if (type == "RELEASE_TOKEN") {
            only({});
            frame.message = ReleaseToken{};
        } else {
            throw ProtocolError(ErrorCode::UnknownType, "unknown frame type '" + type + "'", seq);
        }
    } catch (const ValidationError& e) {
        const auto code = e.code() == ValidationCode::OutOfRange ? ErrorCode::RangeViolation : ErrorCode::SchemaViolation;
        throw ProtocolError(code, e.what(), seq);
    } catch (const ParseError& e) {
        throw ProtocolError(ErrorCode::SchemaViolation, e.what(), seq);
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Server -> client

inline json with_seq(json j, std::optional<std::int64_t> seq) {
    if (seq) j["seq"] = *seq;
    return j;
}

inline json hello_ack_frame(const std::vector<std::string>& scenarios, const std::string& active, bool token,
                            std::int64_t tick, std::optional<std::int64_t> seq = std::nullopt) {
    return with_seq({{"type", "HELLO_ACK"},
                     {"protocol_version", std::string(kProtocolVersion)},
                     {"scenarios", scenarios},
                     {"active_scenario", active},
                     {"token", token},
                     {"tick", tick}},
                    seq);
}

inline json ack_frame(std::string_view acked, std::int64_t tick, std::optional<std::int64_t> seq = std::nullopt) {
    return with_seq({{"type", "ACK"}, {"ack", std::string(acked)}, {"tick", tick}}, seq);
}

inline json error_frame(ErrorCode code, const std::string& message, std::optional<std::int64_t> seq = std::nullopt) {
    return with_seq({{"type", "ERROR"}, {"code", std::string(to_string(code))}, {"message", message}}, seq);
}

inline json scenario_end_frame(std::int64_t tick, double time) {
    return {{"type", "SCENARIO_END"}, {"tick", tick}, {"time_s", time}};
}

inline json vec2_mm(const Vec2& p) { return json::array({p.x() / units::mm, p.y() / units::mm}); }

inline json scene_to_json(const sim::FluoroScene& scene) {
    json vessels = json::array();
    for (std::size_t i = 0; i < scene.vessels.size(); ++i) {
        json pts = json::array();
        for (const auto& p : scene.vessels[i]) pts.push_back(vec2_mm(p));
        vessels.push_back({{"id", scene.vessel_ids[i]}, {"points", pts}});
    }
    json sacs = json::array();
    for (const auto& s : scene.sacs) {
        sacs.push_back({{"id", s.id}, {"center", vec2_mm(s.center)}, {"radius_mm", s.radius / units::mm}, {"fill", s.fill}});
    }
    return {{"view", {{"right", json_util::from_vec3(scene.view.right)}, {"up", json_util::from_vec3(scene.view.up)}}},
            {"vessels", vessels},
            {"markers", json::array({vec2_mm(scene.markers[0]), vec2_mm(scene.markers[1])})},
            {"payload_opacity", scene.payload_opacity},
            {"sacs", sacs}};
}

/// Everything a viewer needs to draw one frame without any history.
struct Snapshot {
    std::int64_t tick{};
    double time{};
    std::string scenario;
    bool paused{};
    sim::TrajectoryRow row;   // pose, mode, field, release, occlusion
    std::optional<Vec3> field_axis; // unknown when replaying a log
    std::optional<int> field_sense;
    std::optional<int> sac;   // set while inside a sac
    double speed{};           // m/s, averaged since the previous snapshot
    std::vector<int> sac_ids;
    std::optional<sim::FluoroScene> scene;
    std::vector<sim::Event> events; // emitted since the previous snapshot
};

inline json snapshot_frame(const Snapshot& s) {
    json occlusion = json::object();
    for (std::size_t j = 0; j < s.sac_ids.size() && j < s.row.occlusion.size(); ++j) {
        occlusion[std::to_string(s.sac_ids[j])] = s.row.occlusion[j];
    }
    json events = json::array();
    for (const auto& e : s.events) events.push_back(sim::event_to_json(e));
    json frame = {{"type", "SNAPSHOT"},
                  {"tick", s.tick},
                  {"time_s", s.time},
                  {"scenario", s.scenario},
                  {"paused", s.paused},
                  {"spinner",
                   {{"mode", std::string(spinner::to_string(s.row.mode))},
                    {"segment", s.row.segment},
                    {"s_mm", s.row.s_m / units::mm},
                    {"position_mm", json_util::from_vec3(s.row.position / units::mm)},
                    {"sac", s.sac ? json(*s.sac) : json(nullptr)}}},
                  {"field",
                   {{"magnitude_mT", s.row.field_mT},
                    {"frequency_rpm", s.row.frequency_rpm},
                    {"axis", s.field_axis ? json_util::from_vec3(*s.field_axis) : json(nullptr)},
                    {"sense", s.field_sense ? json(*s.field_sense) : json(nullptr)}}},
                  {"metrics",
                   {{"speed_cm_s", s.speed / units::cm_per_s},
                    {"released_fraction", s.row.released},
                    {"occlusion", occlusion}}},
                  {"events", events}};
    frame["scene"] = s.scene ? scene_to_json(*s.scene) : json(nullptr);
    return frame;
}

/// Snapshot of a live world.
inline Snapshot make_snapshot(const sim::WorldState& world, const std::string& scenario, bool paused, double speed,
                              std::vector<sim::Event> events) {
    Snapshot s;
    s.tick = world.tick;
    s.time = world.time();
    s.scenario = scenario;
    s.paused = paused;
    s.row = sim::make_row(world);
    s.field_axis = world.last_field.rotation_axis;
    s.field_sense = world.last_field.sense;
    s.sac = world.spinner.sac;
    s.speed = speed;
    for (const auto& sac : world.network().sacs()) s.sac_ids.push_back(sac.id);
    s.scene = sim::fluoro_project(world, world.config->view);
    s.events = std::move(events);
    return s;
}

} // namespace vasim::control
