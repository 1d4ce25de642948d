#pragma once

#include "vasim/core/errors.hpp"
#include "vasim/core/json_util.hpp"
#include "vasim/core/types.hpp"
#include "vasim/field/sources.hpp"
#include "vasim/spinner/spinner.hpp"
#include "vasim/therapy/payload.hpp"
#include "vasim/vascular/flow.hpp"
#include "vasim/vascular/network.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vasim::sim {

using spinner::Mode;

enum class EventKind {
    ModeChange,
    JunctionTaken,
    JunctionStall,
    SealDissolved,
    ReleaseComplete,
    SacOccluded,
    Captured,
    ScenarioEnd,
};

inline std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::ModeChange: return "MODE_CHANGE";
    case EventKind::JunctionTaken: return "JUNCTION_TAKEN";
    case EventKind::JunctionStall: return "JUNCTION_STALL";
    case EventKind::SealDissolved: return "SEAL_DISSOLVED";
    case EventKind::ReleaseComplete: return "RELEASE_COMPLETE";
    case EventKind::SacOccluded: return "SAC_OCCLUDED";
    case EventKind::Captured: return "CAPTURED";
    case EventKind::ScenarioEnd: return "SCENARIO_END";
    }
    return "SCENARIO_END";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (auto k : {EventKind::ModeChange, EventKind::JunctionTaken, EventKind::JunctionStall, EventKind::SealDissolved,
                   EventKind::ReleaseComplete, EventKind::SacOccluded, EventKind::Captured, EventKind::ScenarioEnd}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

struct Event {
    EventKind kind{};
    std::int64_t tick{};
    double time{};
    std::optional<int> segment; // JUNCTION_*
    std::optional<int> node;    // JUNCTION_*
    std::optional<int> sac;     // SAC_OCCLUDED
    std::optional<double> level;
    std::optional<Mode> from_mode; // MODE_CHANGE
    std::optional<Mode> to_mode;

    friend bool operator==(const Event&, const Event&) = default;
};

inline json_util::json event_to_json(const Event& e) {
    json_util::json j;
    j["type"] = std::string(to_string(e.kind));
    j["tick"] = e.tick;
    j["time_s"] = e.time;
    if (e.segment) j["segment"] = *e.segment;
    if (e.node) j["node"] = *e.node;
    if (e.sac) j["sac"] = *e.sac;
    if (e.level) j["level"] = *e.level;
    if (e.from_mode) j["from"] = std::string(spinner::to_string(*e.from_mode));
    if (e.to_mode) j["to"] = std::string(spinner::to_string(*e.to_mode));
    return j;
}

inline Event event_from_json(const json_util::json& j) {
    json_util::reject_unknown_keys(j, {"type", "tick", "time_s", "segment", "node", "sac", "level", "from", "to"},
                                   "event");
    Event e;
    const auto kind = event_kind_from_string(json_util::require<std::string>(j, "type", "event"));
    if (!kind) throw ValidationError(ValidationCode::Schema, "event: unknown type");
    e.kind = *kind;
    e.tick = json_util::require<std::int64_t>(j, "tick", "event");
    e.time = json_util::require<double>(j, "time_s", "event");
    if (j.contains("segment")) e.segment = json_util::as<int>(j["segment"], "event.segment");
    if (j.contains("node")) e.node = json_util::as<int>(j["node"], "event.node");
    if (j.contains("sac")) e.sac = json_util::as<int>(j["sac"], "event.sac");
    if (j.contains("level")) e.level = json_util::as<double>(j["level"], "event.level");
    auto mode_of = [&](const char* key) -> std::optional<Mode> {
        if (!j.contains(key)) return std::nullopt;
        auto m = spinner::mode_from_string(json_util::as<std::string>(j[key], "event mode"));
        if (!m) throw ValidationError(ValidationCode::Schema, "event: unknown mode");
        return m;
    };
    e.from_mode = mode_of("from");
    e.to_mode = mode_of("to");
    return e;
}

// ---------------------------------------------------------------------------
// Commands (SI units; the wire protocol converts at the boundary)

struct SetField {
    Vec3 axis{Vec3::UnitX()};
    double magnitude{}; // T; ignored by a rotating-magnet source
    double frequency{}; // Hz
    int sense{1};
};

struct MoveArm {
    field::PoseDelta delta;
};

struct SetAspiration {
    bool on{};
};

using Command = std::variant<SetField, MoveArm, SetAspiration>;

struct TimedCommand {
    double time{};
    Command command;
};

// ---------------------------------------------------------------------------

struct Sheath {
    vascular::Location tip;
    bool aspiration_on{false};
    double capture_radius{5e-3};   // aspiration reaches this far along the path
    double capture_distance{1e-3}; // captured inside this
    double aspiration_speed{0.05}; // m/s toward the tip
};

/// Orthographic view: screen x = p·right, screen y = p·up.
struct ViewBasis {
    Vec3 right{Vec3::UnitX()};
    Vec3 up{Vec3::UnitY()};

    void validate() const {
        constexpr double tol = 1e-9;
        if (std::abs(right.norm() - 1.0) > tol || std::abs(up.norm() - 1.0) > tol || std::abs(right.dot(up)) > tol) {
            throw ValidationError(ValidationCode::OutOfRange, "view basis must be orthonormal");
        }
    }
};

/// Everything that stays fixed for the lifetime of a world.
struct WorldConfig {
    std::shared_ptr<const vascular::VesselNetwork> network;
    vascular::Resistances resistances;
    vascular::FluidProperties fluid;
    vascular::SacExchangeModel exchange;
    bool flow_enabled{true};
    spinner::SpinnerSpec spinner_spec;
    therapy::CoagulationParams coagulation;
    ViewBasis view;
    /// Maximum arm translation speed (m/s); 0 = unlimited.
    double arm_slew_rate{};
};

inline constexpr double kReleaseCompleteLevel = 0.99;
inline constexpr double kOcclusionLevels[] = {0.5, 0.9, 0.99};

struct WorldState {
    std::shared_ptr<const WorldConfig> config;
    std::int64_t tick{};
    double dt{1e-3};
    double inflow{}; // m³/s at the last solve
    vascular::FlowField flow;
    spinner::SpinnerState spinner;
    field::FieldSource source{field::HelmholtzSource{}};
    field::FieldSample last_field;
    /// Pending arm position when the arm is slew-limited.
    std::optional<Vec3> arm_target;
    therapy::PayloadState payload;
    std::optional<therapy::ExpandableMaterial> expandable;
    std::vector<therapy::SacTherapyState> sacs;
    std::optional<Sheath> sheath;
    std::vector<Event> event_log;
    /// Per sac, the highest SAC_OCCLUDED level already emitted (-1 for none).
    std::vector<double> occlusion_reported;
    double signed_travel{}; // Σ ds, m
    double path_travel{};   // Σ |ds|, m

    [[nodiscard]] double time() const { return static_cast<double>(tick) * dt; }
    [[nodiscard]] const vascular::VesselNetwork& network() const { return *config->network; }
};

struct StepResult {
    WorldState world;
    std::vector<Event> events;
};

} // namespace vasim::sim
