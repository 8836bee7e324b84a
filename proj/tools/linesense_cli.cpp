// linesense: simulate, replay, calibrate, bench, report, serve.
//
// Exit codes: 0 success, 1 validation (bad scenario, data or arguments),
// 2 environment / I/O. LINESENSE_LOG sets log verbosity (default warn).

#include "linesense/dataio.hpp"
#include "linesense/errors.hpp"
#include "linesense/http_server.hpp"
#include "linesense/metrics.hpp"
#include "linesense/pipeline.hpp"
#include "linesense/sensor.hpp"
#include "linesense/service.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace ls = linesense;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct Outcome {
    int code = kExitOk;
    json result = json::object();
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("linesense");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("LINESENSE_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

ls::Scenario scenario_or_default(const std::string& path) {
    if (path.empty()) return ls::default_scenario();
    return ls::dataio::load_scenario_file(path);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ls::IoError("cannot open for reading", path);
    return in;
}

json run_result(const ls::pipeline::RunRecord& run, const std::filesystem::path& manifest) {
    return {{"run_id", run.id},
            {"run_dir", manifest.parent_path().string()},
            {"frames", run.frames.size()},
            {"rejected", run.diagnostics.rejected},
            {"saturated", run.diagnostics.saturated},
            {"condition_number", run.inverse.condition_number},
            {"compute_seconds", run.timing.compute_seconds},
            {"metrics", ls::dataio::table_to_json(run.table)}};
}

void print_run(const ls::pipeline::RunRecord& run, const std::filesystem::path& manifest) {
    fmt::print("{}", ls::metrics::format_table(run.table));
    fmt::print("frames: {}  condition number: {:.4g}  compute: {:.3f} ms ({:.3f} us/frame)\n", run.frames.size(),
               run.inverse.condition_number, run.timing.compute_seconds * 1e3, run.timing.per_frame_seconds * 1e6);
    if (run.diagnostics.rejected > 0) fmt::print("rejected frames: {}\n", run.diagnostics.rejected);
    if (run.diagnostics.saturated > 0) fmt::print("frames beyond GMR full scale: {}\n", run.diagnostics.saturated);
    fmt::print("run written to {}\n", manifest.parent_path().string());
}

struct SimulateArgs {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
};

Outcome simulate(const SimulateArgs& a) {
    auto scenario = ls::dataio::load_scenario_file(a.scenario);
    if (a.seed) scenario.seed = *a.seed;
    const auto run = ls::pipeline::run_simulation(scenario);
    const auto manifest = ls::dataio::write_run(run, a.out);
    print_run(run, manifest);
    return {kExitOk, run_result(run, manifest)};
}

struct ReplayArgs {
    std::string frames;
    std::string scenario;
    std::string out;
};

Outcome replay(const ReplayArgs& a) {
    const auto scenario = ls::dataio::load_scenario_file(a.scenario);
    auto in = open_input(a.frames);
    std::vector<ls::pipeline::Frame> frames;
    try {
        frames = ls::dataio::read_all_frames(in);
    } catch (const ls::ParseError& e) {
        throw ls::ValidationError(fmt::format("{}: {}", a.frames, e.what()));
    }
    const auto run = ls::pipeline::run_replay(scenario, frames);
    const auto manifest = ls::dataio::write_run(run, a.out);
    print_run(run, manifest);
    return {kExitOk, run_result(run, manifest)};
}

struct CalibrateArgs {
    std::vector<std::string> sweeps;
    double vop = 8.0;
    std::string out;
};

Outcome calibrate(const CalibrateArgs& a) {
    json specs = json::array();
    std::vector<std::string> problems;
    std::string table = fmt::format("{:<6} {:>14} {:>12} {:>10} {:>22}\n", "Sensor", "S (mV/V-Oe)", "slope (V/Oe)",
                                    "R^2", "linear region (Oe)");
    for (std::size_t k = 0; k < a.sweeps.size(); ++k) {
        auto in = open_input(a.sweeps[k]);
        try {
            const auto fit = ls::sensor::fit_sensitivity(ls::sensor::read_sweep_csv(in), a.vop);
            table += fmt::format("OT{:<4} {:>14.4f} {:>12.6f} {:>10.6f} {:>10.3f} .. {:<9.3f}\n", k + 1,
                                 fit.fitted_sensitivity, fit.slope, fit.r_squared, fit.linear_region.first,
                                 fit.linear_region.second);
            specs.push_back({{"sensitivity", fit.fitted_sensitivity},
                             {"operating_voltage", a.vop},
                             {"slope_v_per_oe", fit.slope},
                             {"r_squared", fit.r_squared},
                             {"linear_region_oe", {fit.linear_region.first, fit.linear_region.second}},
                             {"source", a.sweeps[k]}});
        } catch (const ls::ValidationError& e) {
            problems.push_back(fmt::format("{}: {}", a.sweeps[k], e.what()));
        } catch (const ls::ParseError& e) {
            problems.push_back(fmt::format("{}: {}", a.sweeps[k], e.what()));
        }
    }
    if (!problems.empty()) throw ls::ValidationError(std::move(problems));
    fmt::print("{}", table);

    // Same shape as a scenario's sensors.gmr entries.
    json gmr = json::array();
    for (const auto& s : specs) gmr.push_back({{"sensitivity", s["sensitivity"]}, {"operating_voltage", a.vop}});
    const json doc = {{"gmr", gmr}, {"fits", specs}};
    if (!a.out.empty()) {
        std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
        if (!out) throw ls::IoError("cannot open for writing", a.out);
        out << doc.dump(2) << '\n';
        if (!out) throw ls::IoError("write failed", a.out);
        fmt::print("sensor specs written to {}\n", a.out);
    }
    return {kExitOk, doc};
}

struct BenchArgs {
    std::vector<double> rates;
    double cycles = 1.0;
    int repetitions = 20;
    std::string scenario;
};

Outcome bench(const BenchArgs& a) {
    if (a.rates.empty()) throw CLI::ValidationError("--rates", "at least one sampling rate is required");
    if (!(a.cycles > 0.0)) throw CLI::ValidationError("--cycles", "must be positive");
    const auto scenario = scenario_or_default(a.scenario);
    std::vector<ls::waveform::SampleGrid> grids;
    for (double r : a.rates) {
        if (!(r > 0.0)) throw CLI::ValidationError("--rates", "sampling rates must be positive");
        const auto n = static_cast<std::size_t>(std::llround(r / scenario.load.fundamental_hz * a.cycles));
        grids.push_back({r, std::max<std::size_t>(n, 1), 0.0});
    }
    const auto rows = ls::pipeline::benchmark(scenario, grids, a.repetitions);
    fmt::print("{:>10} {:>10} {:>14} {:>14} {:>16}\n", "rate (Hz)", "frames", "compute (ms)", "per frame (us)",
               "samples/s");
    json out = json::array();
    for (const auto& r : rows) {
        fmt::print("{:>10.0f} {:>10} {:>14.4f} {:>14.4f} {:>16.4g}\n", r.rate_hz, r.frames, r.compute_seconds * 1e3,
                   r.per_frame_seconds * 1e6, r.samples_per_second);
        out.push_back({{"rate_hz", r.rate_hz},
                       {"frames", r.frames},
                       {"compute_seconds", r.compute_seconds},
                       {"per_frame_seconds", r.per_frame_seconds},
                       {"samples_per_second", r.samples_per_second}});
    }
    return {kExitOk, {{"rows", out}, {"cycles", a.cycles}, {"repetitions", a.repetitions}}};
}

Outcome report(const std::string& run_dir) {
    const auto run = ls::dataio::read_run(run_dir);
    fmt::print("run {} ({} frames)\n", run.id, run.frames.size());
    fmt::print("{}", ls::metrics::format_table(run.table));
    return {kExitOk, {{"run_id", run.id}, {"frames", run.frames.size()}, {"metrics", ls::dataio::table_to_json(run.table)}}};
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct ServeArgs {
    std::string scenario;
    std::string addr = "127.0.0.1:8080";
    std::string runs = "runs";
    std::size_t outbox = 256;
};

Outcome serve(const ServeArgs& a) {
    const auto [host, port] = ls::service::parse_address(a.addr);
    ls::service::ServiceConfig config;
    config.runs_dir = a.runs;
    config.outbox_capacity = a.outbox;
    ls::service::Service service(scenario_or_default(a.scenario), config);
    ls::service::HttpServer server(service, host, port);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.start();
    fmt::print("listening on {}:{}\n", host, server.port());
    std::fflush(stdout);
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    service.shutdown();
    return {kExitOk, {{"address", fmt::format("{}:{}", host, server.port())}}};
}

void emit_json(bool enabled, const std::string& command, const Outcome& outcome, const std::vector<std::string>& errors) {
    if (!enabled) return;
    json line = {{"command", command}, {"status", outcome.code == kExitOk ? "ok" : "error"}, {"exit_code", outcome.code}};
    if (outcome.code == kExitOk)
        line["result"] = outcome.result;
    else
        line["errors"] = errors;
    std::cout << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Virtual test facility for GMR overhead-line current monitoring"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    bool json_output = false;
    app.add_flag("--json", json_output, "Print a machine-readable JSON line last");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a scenario through the recovery pipeline");
    sim_cmd->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
    sim_cmd->add_option("--out", sim.out, "Run output directory")->required();
    sim_cmd->add_option("--seed", sim.seed, "Override the scenario seed");

    ReplayArgs rep;
    auto* rep_cmd = app.add_subcommand("replay", "Recover currents from recorded GMR voltages");
    rep_cmd->add_option("--frames", rep.frames, "Frames CSV (t,ot1..ot4[,hall_a..hall_n])")->required();
    rep_cmd->add_option("--scenario", rep.scenario, "Scenario JSON")->required();
    rep_cmd->add_option("--out", rep.out, "Run output directory")->required();

    CalibrateArgs cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "Fit GMR sensitivities from solenoid sweeps");
    cal_cmd->add_option("--sweep", cal.sweeps, "Sweep CSV (applied_oe,volts), once per sensor")
        ->required()
        ->expected(1, 4);
    cal_cmd->add_option("--vop", cal.vop, "Operating voltage, V")->capture_default_str();
    cal_cmd->add_option("--out", cal.out, "Write fitted specs as JSON");

    BenchArgs ben;
    auto* ben_cmd = app.add_subcommand("bench", "Time the compute stage per sampling rate");
    ben_cmd->add_option("--rates", ben.rates, "Sampling rates, Hz (comma separated)")->required()->delimiter(',');
    ben_cmd->add_option("--cycles", ben.cycles, "Fundamental cycles per run")->capture_default_str();
    ben_cmd->add_option("--repetitions", ben.repetitions, "Timed repetitions (best is kept)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    ben_cmd->add_option("--scenario", ben.scenario, "Scenario JSON (default scenario when omitted)");

    std::string report_dir;
    auto* rpt_cmd = app.add_subcommand("report", "Print the comparison table of a stored run");
    rpt_cmd->add_option("--run", report_dir, "Run directory")->required();

    ServeArgs srv;
    auto* srv_cmd = app.add_subcommand("serve", "Start the HTTP/WebSocket service");
    srv_cmd->add_option("--scenario", srv.scenario, "Initial scenario JSON (default scenario when omitted)");
    srv_cmd->add_option("--addr", srv.addr, "Listen address host:port")->capture_default_str();
    srv_cmd->add_option("--runs", srv.runs, "Directory for persisted runs")->capture_default_str();
    srv_cmd->add_option("--outbox", srv.outbox, "Messages buffered per stream subscriber")->capture_default_str();

    std::string command = "linesense";
    Outcome outcome;
    std::vector<std::string> errors;
    try {
        app.parse(argc, argv);
        command = app.get_subcommands().front()->get_name();
        if (*sim_cmd) outcome = simulate(sim);
        else if (*rep_cmd) outcome = replay(rep);
        else if (*cal_cmd) outcome = calibrate(cal);
        else if (*ben_cmd) outcome = bench(ben);
        else if (*rpt_cmd) outcome = report(report_dir);
        else if (*srv_cmd) outcome = serve(srv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        app.exit(e);
        outcome.code = kExitValidation;
        errors.emplace_back(e.what());
    } catch (const ls::ValidationError& e) {
        outcome.code = kExitValidation;
        errors = e.problems();
        fmt::print(stderr, "validation failed:\n");
        for (const auto& p : errors) fmt::print(stderr, "  - {}\n", p);
    } catch (const ls::ParseError& e) {
        outcome.code = kExitValidation;
        errors.emplace_back(e.what());
        fmt::print(stderr, "error: {}\n", e.what());
    } catch (const ls::NumericError& e) {
        outcome.code = kExitValidation;
        errors.emplace_back(e.what());
        fmt::print(stderr, "error: {}\n", e.what());
    } catch (const ls::IoError& e) {
        outcome.code = kExitIo;
        errors.emplace_back(e.what());
        fmt::print(stderr, "error: {}\n", e.what());
    } catch (const std::exception& e) {
        outcome.code = kExitIo;
        errors.emplace_back(e.what());
        fmt::print(stderr, "error: {}\n", e.what());
    }
    emit_json(json_output, command, outcome, errors);
    return outcome.code;
}
