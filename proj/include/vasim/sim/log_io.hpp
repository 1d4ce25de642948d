#pragma once

/// Trajectory CSV and event JSON-lines I/O. Floats are written in shortest
/// round-trip form, so write -> read reproduces every value bit for bit.

#include "vasim/core/errors.hpp"
#include "vasim/core/json_util.hpp"
#include "vasim/sim/world.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace vasim::sim {

struct TrajectoryRow {
    std::int64_t tick{};
    double time_s{};
    int segment{};
    double s_m{};
    Vec3 position{Vec3::Zero()};
    Mode mode{Mode::Idle};
    double field_mT{};
    double frequency_rpm{};
    double released{};
    std::vector<double> occlusion; // one per sac, in Trajectory::sac_ids order

    friend bool operator==(const TrajectoryRow&, const TrajectoryRow&) = default;
};

struct Trajectory {
    std::vector<int> sac_ids;
    std::vector<TrajectoryRow> rows;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline constexpr std::string_view kTrajectoryColumns = "tick,time_s,segment,s_m,x,y,z,mode,B_mT,f_rpm,released";

inline TrajectoryRow make_row(const WorldState& world) {
    TrajectoryRow row;
    row.tick = world.tick;
    row.time_s = world.time();
    row.segment = world.spinner.segment;
    row.s_m = world.spinner.arc_s;
    row.position = world.spinner.position;
    row.mode = world.spinner.mode;
    row.field_mT = world.last_field.magnitude / units::mT;
    row.frequency_rpm = units::hz_to_rpm(world.last_field.frequency);
    row.released = world.payload.released_fraction;
    for (const auto& sac : world.sacs) {
        row.occlusion.push_back(sac.occlusion);
    }
    return row;
}

namespace detail {

inline void put_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline double get_double(std::string_view text, std::string_view column) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ValidationError(ValidationCode::Schema, "trajectory: bad number '" + std::string(text) + "' in column " +
                                                          std::string(column));
    }
    return v;
}

template <typename Int>
Int get_int(std::string_view text, std::string_view column) {
    Int v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ValidationError(ValidationCode::Schema, "trajectory: bad integer '" + std::string(text) +
                                                          "' in column " + std::string(column));
    }
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace detail

inline std::string trajectory_header(const std::vector<int>& sac_ids) {
    std::string header(kTrajectoryColumns);
    for (int id : sac_ids) {
        header += ",occlusion_" + std::to_string(id);
    }
    return header;
}

inline void append_row(std::string& out, const TrajectoryRow& row) {
    out += std::to_string(row.tick);
    out += ',';
    detail::put_double(out, row.time_s);
    out += ',';
    out += std::to_string(row.segment);
    for (double v : {row.s_m, row.position.x(), row.position.y(), row.position.z()}) {
        out += ',';
        detail::put_double(out, v);
    }
    out += ',';
    out += spinner::to_string(row.mode);
    for (double v : {row.field_mT, row.frequency_rpm, row.released}) {
        out += ',';
        detail::put_double(out, v);
    }
    for (double v : row.occlusion) {
        out += ',';
        detail::put_double(out, v);
    }
    out += '\n';
}

inline std::string format_trajectory(const Trajectory& traj) {
    std::string out = trajectory_header(traj.sac_ids) + "\n";
    for (const auto& row : traj.rows) {
        append_row(out, row);
    }
    return out;
}

inline Trajectory parse_trajectory(std::string_view text) {
    if (text.empty()) {
        throw ValidationError(ValidationCode::Schema, "trajectory: empty file (no header)");
    }
    if (text.back() != '\n') {
        throw ValidationError(ValidationCode::Schema, "trajectory: truncated (last row not terminated)");
    }
    Trajectory traj;
    auto lines = detail::split(text.substr(0, text.size() - 1), '\n');
    std::string_view header = lines.front();
    if (!header.empty() && header.back() == '\r') header.remove_suffix(1);
    if (header.substr(0, kTrajectoryColumns.size()) != kTrajectoryColumns) {
        throw ValidationError(ValidationCode::Schema, "trajectory: header does not match '" +
                                                          std::string(kTrajectoryColumns) + ",occlusion_*'");
    }
    const auto columns = detail::split(header, ',');
    constexpr std::size_t kFixed = 11;
    for (std::size_t c = kFixed; c < columns.size(); ++c) {
        constexpr std::string_view prefix = "occlusion_";
        if (columns[c].substr(0, prefix.size()) != prefix) {
            throw ValidationError(ValidationCode::Schema, "trajectory: unexpected column '" + std::string(columns[c]) + "'");
        }
        traj.sac_ids.push_back(detail::get_int<int>(columns[c].substr(prefix.size()), columns[c]));
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto f = detail::split(line, ',');
        if (f.size() != columns.size()) {
            throw ValidationError(ValidationCode::Schema, "trajectory: row " + std::to_string(i) + " has " +
                                                              std::to_string(f.size()) + " fields, expected " +
                                                              std::to_string(columns.size()));
        }
        TrajectoryRow row;
        row.tick = detail::get_int<std::int64_t>(f[0], "tick");
        row.time_s = detail::get_double(f[1], "time_s");
        row.segment = detail::get_int<int>(f[2], "segment");
        row.s_m = detail::get_double(f[3], "s_m");
        row.position = {detail::get_double(f[4], "x"), detail::get_double(f[5], "y"), detail::get_double(f[6], "z")};
        const auto mode = spinner::mode_from_string(f[7]);
        if (!mode) throw ValidationError(ValidationCode::Schema, "trajectory: unknown mode '" + std::string(f[7]) + "'");
        row.mode = *mode;
        row.field_mT = detail::get_double(f[8], "B_mT");
        row.frequency_rpm = detail::get_double(f[9], "f_rpm");
        row.released = detail::get_double(f[10], "released");
        for (std::size_t c = kFixed; c < f.size(); ++c) {
            row.occlusion.push_back(detail::get_double(f[c], columns[c]));
        }
        traj.rows.push_back(std::move(row));
    }
    return traj;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_log(const Trajectory& traj, const std::string& path) { write_text_file(path, format_trajectory(traj)); }

inline Trajectory read_log(const std::string& path) { return parse_trajectory(json_util::read_file(path)); }

inline std::string format_events(const std::vector<Event>& events) {
    std::string out;
    for (const auto& e : events) {
        out += event_to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Event> parse_events(std::string_view text) {
    std::vector<Event> out;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            throw ValidationError(ValidationCode::Schema, "events: truncated (last line not terminated)");
        }
        const auto line = text.substr(start, end - start);
        if (!line.empty()) {
            out.push_back(event_from_json(json_util::parse(line, "events")));
        }
        start = end + 1;
    }
    return out;
}

} // namespace vasim::sim
