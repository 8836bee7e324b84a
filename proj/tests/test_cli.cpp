#include "doctest.h"

#include "support.hpp"

#include "linesense/dataio.hpp"
#include "linesense/sensor.hpp"

#include "httplib.h"
#include "json.hpp"

#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <netinet/in.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

using namespace linesense;
using nlohmann::json;
using test_support::TempDir;

extern char** environ;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(LINESENSE_SOURCE_DIR) / "scenarios";

struct Result {
    int code = -1;
    std::string output;
    json last_json;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Result run_cli(const std::string& args) {
    const std::string cmd = quote(LINESENSE_CLI) + " " + args + " 2>&1";
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::istringstream lines(r.output);
    for (std::string line; std::getline(lines, line);)
        if (line.starts_with("{\"command\"")) r.last_json = json::parse(line);
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_sweep(const std::filesystem::path& p, const sensor::SolenoidSweepSettings& settings) {
    std::ofstream out(p);
    sensor::write_sweep_csv(out, sensor::make_solenoid_sweep(settings));
}

unsigned short free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

}  // namespace

TEST_CASE("exactly one subcommand") {
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("simulate report").code == 1);
    CHECK(run_cli("frobnicate").code == 1);
    CHECK(run_cli("--help").code == 0);
}

TEST_CASE("simulate the default scenario") {
    TempDir dir;
    const auto r = run_cli("--json simulate --scenario " + quote((kScenarios / "default-linear.json").string()) +
                           " --out " + quote((dir / "run").string()));
    CHECK(r.code == 0);
    CHECK(r.output.find("Load type") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "run" / "run.json"));
    CHECK(std::filesystem::exists(dir / "run" / "frames.csv"));
    CHECK(r.last_json["command"] == "simulate");
    CHECK(r.last_json["status"] == "ok");
    CHECK(r.last_json["exit_code"] == 0);
}

TEST_CASE("same seed twice gives byte-identical frames") {
    TempDir dir;
    const auto scenario = quote((kScenarios / "near-field-nonlinear.json").string());
    REQUIRE(run_cli("simulate --scenario " + scenario + " --out " + quote((dir / "a").string())).code == 0);
    REQUIRE(run_cli("simulate --scenario " + scenario + " --out " + quote((dir / "b").string())).code == 0);
    REQUIRE(run_cli("simulate --scenario " + scenario + " --seed 99 --out " + quote((dir / "c").string())).code == 0);
    const auto a = slurp(dir / "a" / "frames.csv");
    CHECK(a.size() > 1000);
    CHECK(a == slurp(dir / "b" / "frames.csv"));
    CHECK(a != slurp(dir / "c" / "frames.csv"));
}

TEST_CASE("replay of exported voltages reproduces the recovered currents") {
    TempDir dir;
    const auto scenario = quote((kScenarios / "near-field-linear.json").string());
    REQUIRE(run_cli("simulate --scenario " + scenario + " --out " + quote((dir / "sim").string())).code == 0);
    const auto r = run_cli("replay --frames " + quote((dir / "sim" / "voltages.csv").string()) + " --scenario " +
                           scenario + " --out " + quote((dir / "rep").string()));
    CHECK(r.code == 0);
    CHECK(slurp(dir / "sim" / "frames.csv") == slurp(dir / "rep" / "frames.csv"));
}

TEST_CASE("replay edge cases") {
    TempDir dir;
    const auto scenario = quote((kScenarios / "default-linear.json").string());
    {
        std::ofstream(dir / "empty.csv");
        std::ofstream gmr(dir / "gmr.csv");
        gmr << "t,ot1,ot2,ot3,ot4\n0,0.001,0.002,0.001,0.0005\n0.001,0.002,0.001,0.0,0.001\n";
    }
    const auto empty = run_cli("replay --frames " + quote((dir / "empty.csv").string()) + " --scenario " + scenario +
                               " --out " + quote((dir / "e").string()));
    CHECK(empty.code == 0);
    CHECK(empty.output.find("no frames") != std::string::npos);

    const auto gmr = run_cli("replay --frames " + quote((dir / "gmr.csv").string()) + " --scenario " + scenario +
                             " --out " + quote((dir / "g").string()));
    CHECK(gmr.code == 0);
    CHECK(gmr.output.find("no Hall reference") != std::string::npos);

    const auto missing = run_cli("replay --frames " + quote((dir / "nope.csv").string()) + " --scenario " + scenario +
                                 " --out " + quote((dir / "m").string()));
    CHECK(missing.code == 2);
}

TEST_CASE("bad scenario lists every problem and exits 1") {
    TempDir dir;
    auto doc = dataio::scenario_to_json(default_scenario());
    doc["layout"]["heads"][1]["x"] = doc["layout"]["heads"][0]["x"];
    doc["layout"]["heads"][1]["z"] = doc["layout"]["heads"][0]["z"];
    doc["grid"]["rate_hz"] = -5;
    std::ofstream(dir / "bad.json") << doc.dump(2);
    const auto r = run_cli("--json simulate --scenario " + quote((dir / "bad.json").string()) + " --out " +
                           quote((dir / "x").string()));
    CHECK(r.code == 1);
    CHECK(r.output.find("duplicate head positions") != std::string::npos);
    CHECK(r.output.find("rate") != std::string::npos);
    CHECK(r.last_json["status"] == "error");
    CHECK(r.last_json["errors"].size() >= 2);
    CHECK_FALSE(std::filesystem::exists(dir / "x"));
}

TEST_CASE("missing scenario file exits 2") {
    TempDir dir;
    const auto r = run_cli("simulate --scenario /no/such/file.json --out " + quote((dir / "x").string()));
    CHECK(r.code == 2);
}

TEST_CASE("calibrate four synthetic sweeps") {
    TempDir dir;
    std::string args = "--json calibrate --vop 8 --out " + quote((dir / "specs.json").string());
    const double slopes[] = {0.12, 0.10, 0.13, 0.09};
    for (int k = 0; k < 4; ++k) {
        const auto p = dir / ("ot" + std::to_string(k + 1) + ".csv");
        write_sweep(p, {.slope_v_per_oe = slopes[k], .intercept_v = 0.002 * k});
        args += " --sweep " + quote(p.string());
    }
    const auto r = run_cli(args);
    REQUIRE(r.code == 0);
    const auto specs = json::parse(slurp(dir / "specs.json"));
    REQUIRE(specs["gmr"].size() == 4);
    for (int k = 0; k < 4; ++k) {
        const double s = specs["gmr"][k]["sensitivity"];
        CHECK(s == doctest::Approx(slopes[k] * 1000.0 / 8.0).epsilon(1e-9));
        CHECK(s >= 11.0);
        CHECK(s <= 18.0);
    }
    CHECK(specs["gmr"][0]["sensitivity"].get<double>() == doctest::Approx(15.0).epsilon(1e-9));
}

TEST_CASE("calibrate a saturated-only sweep fails") {
    TempDir dir;
    {
        std::ofstream out(dir / "sat.csv");
        out << "applied_oe,volts\n";
        for (int i = -20; i <= 20; ++i) out << 0.1 * i << "," << (i < 0 ? -0.3 : (i == 0 ? 0.0 : 0.3)) << "\n";
    }
    const auto r = run_cli("calibrate --sweep " + quote((dir / "sat.csv").string()));
    CHECK(r.code == 1);
    CHECK(r.output.find("no linear region") != std::string::npos);
}

TEST_CASE("bench") {
    CHECK(run_cli("bench --rates \"\"").code == 1);
    CHECK(run_cli("bench").code == 1);
    const auto r = run_cli("--json bench --rates 1000,5000,10000,20000,28000 --cycles 1 --repetitions 20");
    REQUIRE(r.code == 0);
    const auto rows = r.last_json["result"]["rows"];
    REQUIRE(rows.size() == 5);
    double previous = 0.0;
    for (const auto& row : rows) {
        CHECK(row["compute_seconds"].get<double>() >= previous);
        previous = row["compute_seconds"].get<double>();
    }
    CHECK(rows[4]["frames"] == 560);
    CHECK(rows[4]["compute_seconds"].get<double>() <= 0.0034);
}

TEST_CASE("report on a stored run") {
    TempDir dir;
    REQUIRE(run_cli("simulate --scenario " + quote((kScenarios / "default-nonlinear.json").string()) + " --out " +
                    quote((dir / "run").string()))
                .code == 0);
    const auto r = run_cli("report --run " + quote((dir / "run").string()));
    CHECK(r.code == 0);
    CHECK(r.output.find("Non-linear") != std::string::npos);
    CHECK(run_cli("report --run " + quote((dir / "missing").string())).code == 2);
}

TEST_CASE("serve answers a health probe and stops on SIGTERM") {
    TempDir dir;
    const auto port = free_port();
    const std::string addr = "127.0.0.1:" + std::to_string(port);
    const std::string runs = (dir / "runs").string();
    std::vector<std::string> args{LINESENSE_CLI, "serve", "--addr", addr, "--runs", runs};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    REQUIRE(::posix_spawn(&pid, LINESENSE_CLI, nullptr, nullptr, argv.data(), environ) == 0);

    httplib::Client cli("127.0.0.1", port);
    httplib::Result res;
    for (int attempt = 0; attempt < 100 && !res; ++attempt) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        res = cli.Get("/healthz");
    }
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["status"] == "ok");

    // a second server on the same port cannot bind
    const auto busy = run_cli("serve --addr " + addr);
    CHECK(busy.code == 2);

    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}
