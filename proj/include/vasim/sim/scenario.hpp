#pragma once

/// Scenario files: a network reference plus everything needed to build a world
/// and script it. File units follow the wire protocol (mm, mT, rpm, mL/s);
/// keys carry their unit as a suffix.

#include "vasim/core/errors.hpp"
#include "vasim/core/json_util.hpp"
#include "vasim/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#ifndef VASIM_DEFAULT_FIXTURES
#define VASIM_DEFAULT_FIXTURES "fixtures"
#endif

namespace vasim::sim {

namespace fs = std::filesystem;
using json_util::json;

inline constexpr double kMaxFieldMilliTesla = 50.0;
inline constexpr double kMaxFrequencyRpm = 15000.0;

/// Directory holding the bundled networks and scenarios.
inline fs::path fixtures_dir() {
    if (const char* env = std::getenv("VASIM_FIXTURES"); env != nullptr && *env != '\0') {
        return env;
    }
    return VASIM_DEFAULT_FIXTURES;
}

/// Looks `ref` up next to `base_dir`, then in the fixture directory and its
/// scenarios/ subdirectory.
inline fs::path resolve_resource(const std::string& ref, const fs::path& base_dir) {
    const fs::path p(ref);
    std::vector<fs::path> candidates;
    if (p.is_absolute()) {
        candidates.push_back(p);
    } else {
        if (!base_dir.empty()) candidates.push_back(base_dir / p);
        candidates.push_back(p);
        candidates.push_back(fixtures_dir() / p);
        candidates.push_back(fixtures_dir() / "scenarios" / p);
    }
    for (const auto& c : candidates) {
        std::error_code ec;
        if (fs::is_regular_file(c, ec)) return c;
    }
    throw IoError("cannot find '" + ref + "' (looked beside the scenario and in " + fixtures_dir().string() + ")");
}

// ---------------------------------------------------------------------------
// Commands in clinical units, shared by scenario scripts and the wire protocol

namespace detail {

inline void check_keys(const json& j, std::vector<std::string_view> allowed, std::string_view ctx) {
    json_util::expect_object(j, ctx);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(ValidationCode::UnknownKey, std::string(ctx) + ": unknown key '" + key + "'");
        }
    }
}

inline void check_range(double v, double lo, double hi, const std::string& what) {
    if (!(v >= lo && v <= hi)) {
        throw ValidationError(ValidationCode::OutOfRange, what + " = " + json(v).dump() + " outside [" +
                                                              json(lo).dump() + ", " + json(hi).dump() + "]");
    }
}

inline int parse_sense(const json& j, const std::string& ctx) {
    const int sense = json_util::value_or<int>(j, "sense", 1, ctx);
    if (sense != 1 && sense != -1) {
        throw ValidationError(ValidationCode::OutOfRange, ctx + ".sense must be +1 or -1");
    }
    return sense;
}

inline Vec3 parse_axis(const json& j, const std::string& key, const std::string& ctx) {
    const Vec3 axis = json_util::require_vec3(j, key, ctx);
    if (!(axis.norm() > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, ctx + "." + key + " must be non-zero");
    }
    return axis.normalized();
}

} // namespace detail

/// Parses a SET_FIELD / MOVE_ARM / TOGGLE_ASPIRATION object. `extra` lists
/// additional keys the caller handles (for example the script time).
inline Command command_from_json(const json& j, std::string_view ctx, std::vector<std::string_view> extra = {}) {
    json_util::expect_object(j, ctx);
    const std::string c(ctx);
    const auto type = json_util::require<std::string>(j, "type", c);
    auto allow = [&](std::vector<std::string_view> keys) {
        keys.push_back("type");
        keys.insert(keys.end(), extra.begin(), extra.end());
        detail::check_keys(j, keys, ctx);
    };
    if (type == "SET_FIELD") {
        allow({"axis", "magnitude_mT", "frequency_rpm", "sense"});
        SetField set;
        set.axis = detail::parse_axis(j, "axis", c);
        const double b = json_util::require<double>(j, "magnitude_mT", c);
        const double f = json_util::require<double>(j, "frequency_rpm", c);
        detail::check_range(b, 0.0, kMaxFieldMilliTesla, c + ".magnitude_mT");
        detail::check_range(f, 0.0, kMaxFrequencyRpm, c + ".frequency_rpm");
        set.magnitude = b * units::mT;
        set.frequency = units::rpm_to_hz(f);
        set.sense = detail::parse_sense(j, c);
        return set;
    }
    if (type == "MOVE_ARM") {
        allow({"translation_mm", "axis_rotation"});
        MoveArm move;
        if (j.contains("translation_mm")) {
            move.delta.translation = json_util::to_vec3(j["translation_mm"], c + ".translation_mm") * units::mm;
        }
        if (j.contains("axis_rotation")) {
            const auto& rot = j["axis_rotation"];
            detail::check_keys(rot, {"axis", "angle_deg"}, c + ".axis_rotation");
            move.delta.rotation_axis = detail::parse_axis(rot, "axis", c + ".axis_rotation");
            move.delta.rotation_angle = json_util::require<double>(rot, "angle_deg", c + ".axis_rotation") * kPi / 180.0;
        }
        return move;
    }
    if (type == "TOGGLE_ASPIRATION") {
        allow({"on"});
        return SetAspiration{json_util::require<bool>(j, "on", c)};
    }
    throw ValidationError(ValidationCode::Schema, c + ": unknown command type '" + type + "'");
}

inline json command_to_json(const Command& command) {
    json j;
    if (const auto* set = std::get_if<SetField>(&command)) {
        j["type"] = "SET_FIELD";
        j["axis"] = json_util::from_vec3(set->axis);
        j["magnitude_mT"] = set->magnitude / units::mT;
        j["frequency_rpm"] = units::hz_to_rpm(set->frequency);
        j["sense"] = set->sense;
    } else if (const auto* move = std::get_if<MoveArm>(&command)) {
        j["type"] = "MOVE_ARM";
        j["translation_mm"] = json_util::from_vec3(move->delta.translation / units::mm);
        j["axis_rotation"] = {{"axis", json_util::from_vec3(move->delta.rotation_axis)},
                              {"angle_deg", move->delta.rotation_angle * 180.0 / kPi}};
    } else {
        j["type"] = "TOGGLE_ASPIRATION";
        j["on"] = std::get<SetAspiration>(command).on;
    }
    return j;
}

// ---------------------------------------------------------------------------

struct Target {
    vascular::Location location;
    double tolerance{2e-3};
};

struct InitialPose {
    int segment{};
    double s{};
    std::optional<int> sac;
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {"net_displacement", "path_length",   "mean_speed",
                                                   "time_to_target",   "released_fraction", "sac_occlusion",
                                                   "captured",         "max_flow_residual"};
    return names;
}

struct Scenario {
    std::string name;
    fs::path source_path;
    std::string network_ref;
    std::shared_ptr<const vascular::VesselNetwork> network;
    double duration{1.0};
    double dt{1e-3};
    bool flow_enabled{true};
    vascular::FluidProperties fluid;
    vascular::SacExchangeModel exchange;
    spinner::SpinnerSpec spinner;
    InitialPose initial;
    field::FieldSource source{field::HelmholtzSource{}};
    therapy::PayloadState payload;
    std::optional<therapy::ExpandableMaterial> expandable;
    therapy::CoagulationParams coagulation;
    std::optional<Sheath> sheath;
    std::vector<TimedCommand> commands;
    std::optional<Target> target;
    ViewBasis view;
    double arm_slew_rate{};
    std::vector<std::string> metrics{metric_names()};

    [[nodiscard]] std::int64_t step_count() const { return std::llround(duration / dt); }
};

namespace detail {

inline vascular::Location parse_location(const json& j, const vascular::VesselNetwork& net, const std::string& ctx) {
    const int seg = json_util::require<int>(j, "segment", ctx);
    if (!net.has_segment(seg)) {
        throw ValidationError(ValidationCode::DanglingReference, ctx + ": unknown segment " + std::to_string(seg));
    }
    const double s = json_util::require<double>(j, "s_mm", ctx) * units::mm;
    const double len = net.segment(seg).length;
    if (!(s >= 0.0 && s <= len)) {
        throw ValidationError(ValidationCode::OutOfRange, ctx + ".s_mm outside segment " + std::to_string(seg));
    }
    return {seg, s};
}

inline spinner::PropulsionFit parse_propulsion(const json& j, const fs::path& base_dir) {
    const std::string ctx = "spinner.propulsion";
    check_keys(j, {"anchors", "anchors_csv", "slope_cm_s_per_krpm", "intercept_cm_s"}, ctx);
    const int given = int(j.contains("anchors")) + int(j.contains("anchors_csv")) + int(j.contains("slope_cm_s_per_krpm"));
    if (given != 1) {
        throw ValidationError(ValidationCode::Schema,
                              ctx + ": give exactly one of anchors, anchors_csv, slope_cm_s_per_krpm");
    }
    if (j.contains("slope_cm_s_per_krpm")) {
        spinner::PropulsionFit fit;
        fit.slope = json_util::require<double>(j, "slope_cm_s_per_krpm", ctx) * units::cm_per_s /
                    units::rpm_to_hz(1000.0);
        fit.intercept = json_util::value_or<double>(j, "intercept_cm_s", 0.0, ctx) * units::cm_per_s;
        if (!(fit.slope > 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, ctx + ": slope must be > 0");
        }
        return fit;
    }
    std::vector<spinner::SpeedSample> samples;
    if (j.contains("anchors")) {
        for (const auto& row : json_util::as<std::vector<std::vector<double>>>(j["anchors"], ctx + ".anchors")) {
            if (row.size() != 2) throw ParseError(ctx + ".anchors: rows are [rpm, cm_per_s]");
            samples.push_back({units::rpm_to_hz(row[0]), row[1] * units::cm_per_s});
        }
    } else {
        const auto path = resolve_resource(json_util::as<std::string>(j["anchors_csv"], ctx), base_dir);
        samples = spinner::parse_anchor_csv(json_util::read_file(path.string()));
    }
    return spinner::calibrate_propulsion(samples);
}

inline spinner::SpinnerSpec parse_spinner(const json& j, const fs::path& base_dir) {
    const std::string ctx = "spinner";
    check_keys(j,
               {"outer_diameter_mm", "body_length_mm", "helix_handedness", "magnet_moment_Am2", "propulsion",
                "flow_coupling", "idle_coupling", "alignment_cutoff_deg", "modes"},
               ctx);
    spinner::SpinnerSpec spec;
    spec.outer_diameter = json_util::value_or<double>(j, "outer_diameter_mm", spec.outer_diameter / units::mm, ctx) * units::mm;
    spec.body_length = json_util::value_or<double>(j, "body_length_mm", spec.body_length / units::mm, ctx) * units::mm;
    spec.helix_handedness = json_util::value_or<int>(j, "helix_handedness", spec.helix_handedness, ctx);
    spec.magnet_moment = json_util::value_or<double>(j, "magnet_moment_Am2", spec.magnet_moment, ctx);
    spec.flow_coupling = json_util::value_or<double>(j, "flow_coupling", spec.flow_coupling, ctx);
    spec.idle_coupling = json_util::value_or<double>(j, "idle_coupling", spec.idle_coupling, ctx);
    spec.alignment_cutoff =
        json_util::value_or<double>(j, "alignment_cutoff_deg", spec.alignment_cutoff * 180.0 / kPi, ctx) * kPi / 180.0;
    if (j.contains("propulsion")) {
        spec.propulsion = parse_propulsion(j["propulsion"], base_dir);
    }
    if (j.contains("modes")) {
        const auto& m = j["modes"];
        check_keys(m, {"flip_to_spin_Hz_per_T", "step_out_Hz_per_T", "min_field_mT"}, "spinner.modes");
        spec.modes.flip_to_spin_slope =
            json_util::value_or<double>(m, "flip_to_spin_Hz_per_T", spec.modes.flip_to_spin_slope, "spinner.modes");
        spec.modes.step_out_slope =
            json_util::value_or<double>(m, "step_out_Hz_per_T", spec.modes.step_out_slope, "spinner.modes");
        spec.modes.minimum_field =
            json_util::value_or<double>(m, "min_field_mT", spec.modes.minimum_field / units::mT, "spinner.modes") *
            units::mT;
    }
    spec.validate();
    return spec;
}

inline field::FieldSource parse_field(const json& j) {
    const std::string ctx = "field";
    const auto type = json_util::require<std::string>(j, "type", ctx);
    if (type == "helmholtz") {
        check_keys(j, {"type", "axis", "magnitude_mT", "frequency_rpm", "sense"}, ctx);
        const double b = json_util::value_or<double>(j, "magnitude_mT", 0.0, ctx);
        const double f = json_util::value_or<double>(j, "frequency_rpm", 0.0, ctx);
        check_range(b, 0.0, kMaxFieldMilliTesla, "field.magnitude_mT");
        check_range(f, 0.0, kMaxFrequencyRpm, "field.frequency_rpm");
        const Vec3 axis = j.contains("axis") ? parse_axis(j, "axis", ctx) : Vec3::UnitX();
        return field::HelmholtzSource(axis, b * units::mT, units::rpm_to_hz(f), parse_sense(j, ctx));
    }
    if (type == "dipole") {
        check_keys(j, {"type", "position_mm", "spin_axis", "moment_Am2", "frequency_rpm", "sense"}, ctx);
        field::DipoleActuator arm;
        arm.position = json_util::require_vec3(j, "position_mm", ctx) * units::mm;
        arm.spin_axis = j.contains("spin_axis") ? parse_axis(j, "spin_axis", ctx) : Vec3::UnitX();
        arm.moment_magnitude = json_util::require<double>(j, "moment_Am2", ctx);
        const double f = json_util::value_or<double>(j, "frequency_rpm", 0.0, ctx);
        check_range(f, 0.0, kMaxFrequencyRpm, "field.frequency_rpm");
        arm.frequency = units::rpm_to_hz(f);
        arm.sense = parse_sense(j, ctx);
        return arm.validated();
    }
    throw ValidationError(ValidationCode::Schema, "field.type must be 'helmholtz' or 'dipole'");
}

inline therapy::PayloadState parse_payload(const json& j) {
    const std::string ctx = "payload";
    check_keys(j, {"agent", "loaded_mass_mg", "seal_time_s", "seal_integrity", "tau_flip_s", "tau_spin_s"}, ctx);
    therapy::PayloadState p;
    const auto agent = therapy::agent_from_string(json_util::value_or<std::string>(j, "agent", "NONE", ctx));
    if (!agent) throw ValidationError(ValidationCode::Schema, "payload.agent must be MODEL_DYE, COAGULANT or NONE");
    p.agent = *agent;
    p.loaded_mass = json_util::value_or<double>(j, "loaded_mass_mg", 0.0, ctx) * 1e-6;
    p.seal.dissolution_time = json_util::value_or<double>(j, "seal_time_s", p.seal.dissolution_time, ctx);
    p.seal.integrity = json_util::value_or<double>(j, "seal_integrity", 1.0, ctx);
    p.kinetics.tau_flip = json_util::value_or<double>(j, "tau_flip_s", p.kinetics.tau_flip, ctx);
    p.kinetics.tau_spin = json_util::value_or<double>(j, "tau_spin_s", p.kinetics.tau_spin, ctx);
    if (!(p.loaded_mass >= 0.0) || !(p.seal.dissolution_time > 0.0) || !(p.kinetics.tau_flip > 0.0) ||
        !(p.kinetics.tau_spin > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, "payload: mass must be >= 0 and time constants > 0");
    }
    check_range(p.seal.integrity, 0.0, 1.0, "payload.seal_integrity");
    return p;
}

} // namespace detail

/// Applies command-line style overrides (currently the timestep).
struct ScenarioOverrides {
    std::optional<double> dt;
};

inline void validate_scenario(const Scenario& sc) {
    if (!(sc.dt > 0.0) || !std::isfinite(sc.dt)) {
        throw ValidationError(ValidationCode::OutOfRange, "scenario dt must be > 0");
    }
    if (!(sc.duration >= sc.dt) || !std::isfinite(sc.duration)) {
        throw ValidationError(ValidationCode::OutOfRange, "scenario duration must be >= dt");
    }
    for (std::size_t i = 1; i < sc.commands.size(); ++i) {
        if (sc.commands[i].time < sc.commands[i - 1].time) {
            throw ValidationError(ValidationCode::Schema, "scenario commands must be sorted by time");
        }
    }
    for (const auto& tc : sc.commands) {
        if (!(tc.time >= 0.0)) throw ValidationError(ValidationCode::OutOfRange, "command time must be >= 0");
        if (std::holds_alternative<MoveArm>(tc.command) && !std::holds_alternative<field::DipoleActuator>(sc.source)) {
            throw ValidationError(ValidationCode::DanglingReference, "MOVE_ARM needs a dipole field source");
        }
        if (std::holds_alternative<SetAspiration>(tc.command) && !sc.sheath) {
            throw ValidationError(ValidationCode::DanglingReference, "TOGGLE_ASPIRATION needs a sheath");
        }
    }
    sc.view.validate();
}

inline Scenario scenario_from_json(const json& doc, const fs::path& source_path = {},
                                   const ScenarioOverrides& overrides = {}) {
    using json_util::require;
    using json_util::value_or;
    const std::string ctx = "scenario";
    detail::check_keys(doc,
                       {"name", "network", "duration_s", "dt_s", "flow_enabled", "fluid", "inflow", "sac_exchange",
                        "spinner", "initial", "field", "payload", "expandable", "coagulation", "sheath", "commands",
                        "target", "view", "arm_slew_rate_mm_s", "metrics"},
                       ctx);
    Scenario sc;
    sc.source_path = source_path;
    const fs::path base_dir = source_path.empty() ? fs::path{} : source_path.parent_path();
    sc.name = value_or<std::string>(doc, "name", source_path.stem().string(), ctx);
    sc.network_ref = require<std::string>(doc, "network", ctx);
    auto net = vascular::load_network_file(resolve_resource(sc.network_ref, base_dir).string());

    if (doc.contains("inflow")) {
        const auto& in = doc["inflow"];
        detail::check_keys(in, {"mean_flow_mL_s", "peak_ratio", "heart_rate_Hz"}, "scenario.inflow");
        auto spec = net.inflow();
        spec.mean_flow = value_or<double>(in, "mean_flow_mL_s", spec.mean_flow / units::mL, "inflow") * units::mL;
        spec.peak_ratio = value_or<double>(in, "peak_ratio", spec.peak_ratio, "inflow");
        spec.heart_rate = value_or<double>(in, "heart_rate_Hz", spec.heart_rate, "inflow");
        net = vascular::VesselNetwork(net.nodes(), net.segments(), net.sacs(), spec);
    }
    sc.network = std::make_shared<const vascular::VesselNetwork>(std::move(net));
    const auto& network = *sc.network;

    sc.duration = require<double>(doc, "duration_s", ctx);
    sc.dt = overrides.dt.value_or(value_or<double>(doc, "dt_s", 1e-3, ctx));
    sc.flow_enabled = value_or<bool>(doc, "flow_enabled", true, ctx);
    if (doc.contains("fluid")) {
        const auto& f = doc["fluid"];
        detail::check_keys(f, {"viscosity_mPa_s", "density_kg_m3"}, "scenario.fluid");
        sc.fluid.viscosity = value_or<double>(f, "viscosity_mPa_s", sc.fluid.viscosity * 1e3, "fluid") * 1e-3;
        sc.fluid.density = value_or<double>(f, "density_kg_m3", sc.fluid.density, "fluid");
    }
    if (doc.contains("sac_exchange")) {
        const auto& e = doc["sac_exchange"];
        detail::check_keys(e, {"kappa"}, "scenario.sac_exchange");
        sc.exchange.kappa = value_or<double>(e, "kappa", sc.exchange.kappa, "sac_exchange");
        if (!(sc.exchange.kappa >= 0.0)) throw ValidationError(ValidationCode::OutOfRange, "sac_exchange.kappa must be >= 0");
    }
    if (doc.contains("spinner")) {
        sc.spinner = detail::parse_spinner(doc["spinner"], base_dir);
    }

    if (!doc.contains("initial")) {
        throw ValidationError(ValidationCode::MissingKey, "scenario: missing key 'initial'");
    }
    const auto& init = doc["initial"];
    detail::check_keys(init, {"segment", "s_mm", "sac"}, "scenario.initial");
    if (init.contains("sac")) {
        const int sac_id = json_util::as<int>(init["sac"], "initial.sac");
        if (!network.has_sac(sac_id)) {
            throw ValidationError(ValidationCode::DanglingReference, "initial.sac: unknown sac " + std::to_string(sac_id));
        }
        const auto& sac = network.sac(sac_id);
        sc.initial = {sac.host_segment, sac.arc_position, sac_id};
    } else {
        const auto loc = detail::parse_location(init, network, "initial");
        sc.initial = {loc.segment, loc.s, std::nullopt};
    }

    if (doc.contains("field")) sc.source = detail::parse_field(doc["field"]);
    if (doc.contains("payload")) sc.payload = detail::parse_payload(doc["payload"]);
    if (doc.contains("expandable")) {
        const auto& e = doc["expandable"];
        detail::check_keys(e, {"coat_time_s", "tau_swell_s", "initial_volume_fraction"}, "scenario.expandable");
        therapy::ExpandableMaterial m;
        m.params.coat_time = value_or<double>(e, "coat_time_s", m.params.coat_time, "expandable");
        m.params.tau_swell = value_or<double>(e, "tau_swell_s", m.params.tau_swell, "expandable");
        m.params.initial_volume_fraction =
            value_or<double>(e, "initial_volume_fraction", m.params.initial_volume_fraction, "expandable");
        if (!(m.params.coat_time >= 0.0) || !(m.params.tau_swell > 0.0) ||
            !(m.params.initial_volume_fraction > 0.0 && m.params.initial_volume_fraction <= 1.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "expandable: bad parameters");
        }
        sc.expandable = m;
    }
    if (doc.contains("coagulation")) {
        const auto& c = doc["coagulation"];
        detail::check_keys(c, {"k_clot_m3_kg_s", "c_min_kg_m3"}, "scenario.coagulation");
        sc.coagulation.k_clot = value_or<double>(c, "k_clot_m3_kg_s", sc.coagulation.k_clot, "coagulation");
        sc.coagulation.c_min = value_or<double>(c, "c_min_kg_m3", sc.coagulation.c_min, "coagulation");
        if (!(sc.coagulation.k_clot >= 0.0) || !(sc.coagulation.c_min >= 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "coagulation constants must be >= 0");
        }
    }
    if (doc.contains("sheath")) {
        const auto& s = doc["sheath"];
        detail::check_keys(s,
                           {"segment", "s_mm", "aspiration_on", "capture_radius_mm", "capture_distance_mm",
                            "aspiration_speed_cm_s"},
                           "scenario.sheath");
        Sheath sheath;
        sheath.tip = detail::parse_location(s, network, "sheath");
        sheath.aspiration_on = value_or<bool>(s, "aspiration_on", false, "sheath");
        sheath.capture_radius = value_or<double>(s, "capture_radius_mm", 5.0, "sheath") * units::mm;
        sheath.capture_distance = value_or<double>(s, "capture_distance_mm", 1.0, "sheath") * units::mm;
        sheath.aspiration_speed = value_or<double>(s, "aspiration_speed_cm_s", 5.0, "sheath") * units::cm_per_s;
        if (!(sheath.capture_distance > 0.0 && sheath.capture_radius >= sheath.capture_distance &&
              sheath.aspiration_speed >= 0.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "sheath: need 0 < capture distance <= capture radius");
        }
        sc.sheath = sheath;
    }
    if (doc.contains("commands")) {
        if (!doc["commands"].is_array()) throw ParseError("scenario.commands: expected an array");
        std::size_t i = 0;
        for (const auto& item : doc["commands"]) {
            const std::string cctx = "commands[" + std::to_string(i++) + "]";
            const double t = require<double>(item, "t_s", cctx);
            sc.commands.push_back({t, command_from_json(item, cctx, {"t_s"})});
        }
    }
    if (doc.contains("target")) {
        const auto& t = doc["target"];
        detail::check_keys(t, {"segment", "s_mm", "tolerance_mm"}, "scenario.target");
        sc.target = Target{detail::parse_location(t, network, "target"),
                           value_or<double>(t, "tolerance_mm", 2.0, "target") * units::mm};
    }
    if (doc.contains("view")) {
        const auto& v = doc["view"];
        detail::check_keys(v, {"right", "up"}, "scenario.view");
        sc.view.right = json_util::require_vec3(v, "right", "view");
        sc.view.up = json_util::require_vec3(v, "up", "view");
    }
    sc.arm_slew_rate = value_or<double>(doc, "arm_slew_rate_mm_s", 0.0, ctx) * units::mm;
    if (!(sc.arm_slew_rate >= 0.0)) throw ValidationError(ValidationCode::OutOfRange, "arm_slew_rate_mm_s must be >= 0");
    if (doc.contains("metrics")) {
        sc.metrics = json_util::as<std::vector<std::string>>(doc["metrics"], "scenario.metrics");
        for (const auto& m : sc.metrics) {
            const auto& known = metric_names();
            if (std::find(known.begin(), known.end(), m) == known.end()) {
                throw ValidationError(ValidationCode::Schema, "scenario.metrics: unknown metric '" + m + "'");
            }
        }
    }
    validate_scenario(sc);
    return sc;
}

inline Scenario load_scenario_file(const std::string& path, const ScenarioOverrides& overrides = {}) {
    return scenario_from_json(json_util::parse(json_util::read_file(path), path), fs::path(path), overrides);
}

/// The initial world for `sc`: flow solved and field sampled at t = 0.
inline WorldState build_world(const Scenario& sc) {
    auto config = std::make_shared<WorldConfig>();
    config->network = sc.network;
    config->fluid = sc.fluid;
    config->resistances = vascular::build_resistances(*sc.network, sc.fluid.viscosity);
    config->exchange = sc.exchange;
    config->flow_enabled = sc.flow_enabled;
    config->spinner_spec = sc.spinner;
    config->coagulation = sc.coagulation;
    config->view = sc.view;
    config->arm_slew_rate = sc.arm_slew_rate;

    WorldState world;
    world.config = config;
    world.dt = sc.dt;
    world.source = sc.source;
    world.payload = sc.payload;
    world.expandable = sc.expandable;
    world.sheath = sc.sheath;
    world.sacs.assign(sc.network->sacs().size(), therapy::SacTherapyState{});
    world.occlusion_reported.assign(sc.network->sacs().size(), -1.0);
    world.spinner.segment = sc.initial.segment;
    world.spinner.arc_s = sc.initial.s;
    world.spinner.sac = sc.initial.sac;
    world.spinner.position = spinner::spinner_position(*sc.network, world.spinner);
    world.inflow = sc.flow_enabled ? vascular::inflow_waveform(0.0, sc.network->inflow()) : 0.0;
    world.flow = vascular::solve_flow(*sc.network, config->resistances, world.inflow, {}, sc.exchange);
    world.last_field = field::sample(world.source, world.spinner.position, 0.0);
    return world;
}

} // namespace vasim::sim
