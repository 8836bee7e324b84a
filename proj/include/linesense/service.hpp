#pragma once

// Control plane for the dashboard: active scenario, run lifecycle, stream
// fan-out and persisted runs. Transport-free; http_server.hpp puts it on the
// network.
//
// Routes (JSON bodies):
//   GET  /healthz
//   GET  /scenario          active scenario, hash, condition number
//   PUT  /scenario          validate + swap; 409 while running, 422 on errors
//   POST /run/start         {"mode": "simulate"|"replay", "frames": n,
//                            "frames_file": "path", "speed": 1.0}; 409 while running
//   POST /run/stop          finalize and persist; 409 when idle
//   GET  /runs              persisted run summaries
//   GET  /runs/{id}         one run manifest
// Stream: subscribe(mask), served at /stream?mask=...

#include "linesense/scenario.hpp"
#include "linesense/stream.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace linesense::service {

struct ServiceConfig {
    std::filesystem::path runs_dir = "runs";
    std::size_t outbox_capacity = 256;      // messages per stream subscriber
    double envelopes_per_second = 60.0;     // per second of signal time
    std::size_t max_run_frames = 28000 * 300;  // open-ended simulate runs stop here
    std::size_t queue_capacity = 4096;
    int socket_send_buffer = 0;             // bytes; 0 keeps the OS default
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

class Service {
public:
    Service(Scenario initial, ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Routes a request. Never throws.
    Response handle(std::string_view method, std::string_view target, std::string_view body);

    Response health() const;
    Response get_scenario() const;
    Response put_scenario(std::string_view body);
    Response start_run(std::string_view body);
    Response stop_run();
    Response list_runs() const;
    Response get_run(std::string_view id) const;

    // Subscribers added while idle receive the end notice straight away.
    std::shared_ptr<stream::Subscriber> subscribe(unsigned mask);

    bool running() const;
    // Waits for an active run to end on its own. False on timeout.
    bool wait_idle(std::chrono::milliseconds timeout);
    // Stops any run and ends every stream.
    void shutdown();

    const ServiceConfig& config() const noexcept { return config_; }
    std::string active_scenario_hash() const;

private:
    struct ActiveRun;

    void reap_locked();
    void run_main(ActiveRun& run);
    void broadcast(const stream::Broadcast& b);
    void end_streams(std::string_view reason, std::string_view run_id);

    ServiceConfig config_;

    mutable std::mutex control_;  // serializes control requests
    Scenario scenario_;
    std::string scenario_hash_;
    double condition_number_ = 0.0;
    std::unique_ptr<ActiveRun> active_;
    std::size_t run_counter_ = 0;

    mutable std::mutex subscribers_mutex_;
    std::vector<std::weak_ptr<stream::Subscriber>> subscribers_;
};

}  // namespace linesense::service
