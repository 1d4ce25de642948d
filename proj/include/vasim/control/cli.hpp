#pragma once

/// `vasim run|calibrate|serve|replay`. Exit codes: 0 ok, 1 unexpected,
/// 2 parse, 3 validation, 4 I/O.

#include "vasim/control/live.hpp"
#include "vasim/sim/run.hpp"
#include "vasim/spinner/propulsion.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

namespace vasim::control {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kParse = 2, kValidation = 3, kIo = 4 };

inline constexpr unsigned short kDefaultPort = 8700;
inline constexpr std::string_view kDefaultServeScenario = "straight_teleop";

namespace detail {

inline std::atomic<bool>& stop_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

extern "C" inline void on_interrupt(int) { stop_flag().store(true); }

/// A path if it exists, otherwise a lookup through the fixture directories.
inline fs::path locate_scenario(const std::string& ref) {
    if (fs::exists(ref)) return ref;
    const auto with_ext = ref + ".json";
    if (fs::path(ref).extension() != ".json") {
        try {
            return sim::resolve_resource(with_ext, fs::current_path());
        } catch (const IoError&) {
        }
    }
    try {
        return sim::resolve_resource(ref, fs::current_path());
    } catch (const IoError&) {
        throw IoError("scenario file '" + ref + "' not found");
    }
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

struct RunArgs {
    std::string scenario;
    std::string out{"out"};
    std::optional<double> dt;
};

inline int do_run(const RunArgs& a, std::ostream& out) {
    sim::ScenarioOverrides overrides;
    overrides.dt = a.dt;
    const auto path = locate_scenario(a.scenario);
    const auto sc = sim::load_scenario_file(path.string(), overrides);
    const auto result = sim::run_scenario(sc);
    const fs::path dir(a.out);
    ensure_dir(dir);
    sim::write_log(result.trajectory, (dir / "trajectory.csv").string());
    sim::write_text_file((dir / "events.jsonl").string(), sim::format_events(result.events));
    sim::write_text_file((dir / "metrics.json").string(), sim::metrics_to_json(result.metrics, sc.metrics).dump(2) + "\n");
    out << sc.name << ": " << result.trajectory.rows.size() << " steps, " << result.events.size() << " events -> "
        << dir.string() << "\n";
    return kOk;
}

struct CalibrateArgs {
    std::string csv;
    std::string out;
};

inline int do_calibrate(const CalibrateArgs& a, std::ostream& out) {
    const auto samples = spinner::parse_anchor_csv(json_util::read_file(a.csv));
    const auto report = spinner::calibration_report(samples);
    const double slope_cm_krpm = report.fit.slope / units::cm_per_s * (1000.0 / 60.0);
    const double intercept_cm = report.fit.intercept / units::cm_per_s;

    json residuals = json::array();
    out << std::setprecision(6);
    out << "v = a*f + c\n";
    out << "a = " << slope_cm_krpm << " cm/s per krpm (" << report.fit.slope << " m/s per Hz)\n";
    out << "c = " << intercept_cm << " cm/s\n";
    out << "rpm,measured_cm_s,predicted_cm_s,residual_cm_s\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double r = report.residuals[i] / units::cm_per_s;
        residuals.push_back(r);
        out << samples[i].frequency * 60.0 << "," << samples[i].speed / units::cm_per_s << ","
            << samples[i].speed / units::cm_per_s + r << "," << r << "\n";
    }
    const double max_r = report.max_abs_residual / units::cm_per_s;
    out << "max |residual| = " << max_r << " cm/s\n";
    if (!a.out.empty()) {
        const json doc = {{"slope_m_s_per_Hz", report.fit.slope},
                          {"intercept_m_s", report.fit.intercept},
                          {"slope_cm_s_per_krpm", slope_cm_krpm},
                          {"intercept_cm_s", intercept_cm},
                          {"residuals_cm_s", residuals},
                          {"max_abs_residual_cm_s", max_r}};
        sim::write_text_file(a.out, doc.dump(2) + "\n");
    }
    return kOk;
}

struct ServeArgs {
    std::string scenario{kDefaultServeScenario};
    std::string host{"127.0.0.1"};
    unsigned short port{kDefaultPort};
    double speed{1.0};
};

inline int do_serve(const ServeArgs& a, std::ostream& out) {
    const auto path = locate_scenario(a.scenario);
    auto catalog = scan_catalog(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    SessionCore core(std::move(catalog), path.stem().string());
    WsServer server(a.host, a.port);
    server.start();
    out << "serving " << core.scenario().name << " on ws://" << a.host << ":" << server.port() << " ("
        << kProtocolVersion << ")\n"
        << std::flush;
    stop_flag().store(false);
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    LiveOptions opts;
    opts.speed = a.speed;
    opts.stop = &stop_flag();
    run_live(core, server, opts);
    server.stop();
    return kOk;
}

struct ReplayArgs {
    std::string csv;
    double speed{1.0};
    std::optional<unsigned short> port;
    std::string host{"127.0.0.1"};
    std::string scenario;
};

inline int do_replay(const ReplayArgs& a, std::ostream& out) {
    const auto log = sim::read_log(a.csv);
    ReplayOptions opts;
    opts.speed = a.speed;
    opts.scenario_name = fs::path(a.csv).stem().string();
    std::optional<sim::WorldState> world;
    if (!a.scenario.empty()) {
        const auto sc = sim::load_scenario_file(locate_scenario(a.scenario).string());
        opts.scenario_name = sc.name;
        world = sim::build_world(sc);
        opts.world = &*world;
    }
    stop_flag().store(false);
    opts.stop = &stop_flag();
    if (!a.port) {
        replay_to_stream(log, opts, out);
        return kOk;
    }
    WsServer server(a.host, *a.port);
    server.start();
    std::cerr << "replaying " << log.rows.size() << " rows on ws://" << a.host << ":" << server.port() << "\n";
    std::signal(SIGINT, on_interrupt);
    replay_to_server(log, opts, server);
    std::this_thread::sleep_for(std::chrono::milliseconds(100)); // let the last frames flush
    server.stop();
    return kOk;
}

} // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"vasim: magnetic milli-spinner vascular simulator"};
    app.require_subcommand(1);

    detail::RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a scenario; write trajectory.csv, events.jsonl, metrics.json");
    run->add_option("--scenario", run_args.scenario, "Scenario file or fixture name")->required();
    run->add_option("--out", run_args.out, "Output directory")->capture_default_str();
    run->add_option("--dt", run_args.dt, "Override the time step, s")->check(CLI::PositiveNumber);

    detail::CalibrateArgs cal_args;
    auto* calibrate = app.add_subcommand("calibrate", "Fit the speed law to rpm,speed_cm_per_s rows");
    calibrate->add_option("csv", cal_args.csv, "Anchor CSV")->required();
    calibrate->add_option("--out", cal_args.out, "Write the fit report as JSON");

    detail::ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Live teleoperation server");
    serve->add_option("--scenario", serve_args.scenario, "Initial scenario")->capture_default_str();
    serve->add_option("--port", serve_args.port, "TCP port")->capture_default_str();
    serve->add_option("--host", serve_args.host, "Listen address")->capture_default_str();
    serve->add_option("--speed", serve_args.speed, "Sim seconds per wall second")->check(CLI::PositiveNumber);

    detail::ReplayArgs replay_args;
    auto* replay = app.add_subcommand("replay", "Stream a recorded trajectory as snapshots");
    replay->add_option("csv", replay_args.csv, "trajectory.csv")->required();
    replay->add_option("--speed", replay_args.speed, "Playback speed multiplier")->check(CLI::PositiveNumber);
    replay->add_option("--port", replay_args.port, "Serve over WebSocket instead of stdout");
    replay->add_option("--host", replay_args.host, "Listen address")->capture_default_str();
    replay->add_option("--scenario", replay_args.scenario, "Scenario whose network is drawn");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kParse;
    }

    try {
        if (run->parsed()) return detail::do_run(run_args, out);
        if (calibrate->parsed()) return detail::do_calibrate(cal_args, out);
        if (serve->parsed()) return detail::do_serve(serve_args, out);
        if (replay->parsed()) return detail::do_replay(replay_args, out);
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUnexpected;
    }
    return kUnexpected;
}

} // namespace vasim::control
