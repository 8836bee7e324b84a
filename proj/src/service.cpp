#include "linesense/service.hpp"

#include "linesense/dataio.hpp"
#include "linesense/errors.hpp"
#include "linesense/report.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>

namespace linesense::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Service::ActiveRun {
    std::string id;
    Scenario scenario;
    std::string hash;
    bool replay = false;
    std::filesystem::path frames_file;
    std::size_t frame_limit = 0;
    double speed = 1.0;

    std::atomic<bool> stop{false};
    std::atomic<bool> finished{false};
    std::thread thread;

    // Written by the run thread before `finished` is set.
    json summary;
    std::string error;
};

namespace {

Response error_response(int status, std::string message, std::vector<std::string> problems = {}) {
    json body = {{"error", std::move(message)}};
    if (!problems.empty()) body["problems"] = std::move(problems);
    return {status, std::move(body)};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool valid_run_id(std::string_view id) {
    if (id.empty() || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
    });
}

std::string timestamp_now() {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    return fmt::format("{:%Y%m%dT%H%M%S}", utc);
}

}  // namespace

Service::Service(Scenario initial, ServiceConfig config) : config_(std::move(config)) {
    validate_scenario(initial);
    const field::FieldModel model(geometry::validate_layout(initial.layout));
    const auto report = coupling::condition_report(model);
    if (report.singular) throw DegenerateError("degenerate sensor placement: coupling matrix is singular");
    if (report.condition_number > initial.cond_limit)
        throw IllConditionedError(report.condition_number, initial.cond_limit);
    scenario_ = std::move(initial);
    scenario_hash_ = dataio::scenario_hash(scenario_);
    condition_number_ = report.condition_number;
}

Service::~Service() { shutdown(); }

Response Service::handle(std::string_view method, std::string_view target, std::string_view body) {
    const auto q = target.find('?');
    const std::string_view path = target.substr(0, q);
    try {
        auto only = [&](std::string_view allowed) -> std::optional<Response> {
            if (method == allowed) return std::nullopt;
            return error_response(405, fmt::format("method {} not allowed on {}", method, path));
        };
        if (path == "/healthz") return only("GET").value_or(health());
        if (path == "/scenario") {
            if (method == "GET") return get_scenario();
            if (method == "PUT") return put_scenario(body);
            return error_response(405, fmt::format("method {} not allowed on {}", method, path));
        }
        if (path == "/run/start") {
            if (auto r = only("POST")) return *r;
            return start_run(body);
        }
        if (path == "/run/stop") {
            if (auto r = only("POST")) return *r;
            return stop_run();
        }
        if (path == "/runs") {
            if (auto r = only("GET")) return *r;
            return list_runs();
        }
        constexpr std::string_view runs_prefix = "/runs/";
        if (path.starts_with(runs_prefix)) {
            if (auto r = only("GET")) return *r;
            return get_run(path.substr(runs_prefix.size()));
        }
        return error_response(404, fmt::format("no route for {}", path));
    } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", method, path, e.what());
        return error_response(500, e.what());
    }
}

Response Service::health() const {
    std::lock_guard lock(control_);
    const bool busy = active_ && !active_->finished.load();
    return {200, {{"status", "ok"}, {"running", busy}, {"scenario_hash", scenario_hash_}}};
}

Response Service::get_scenario() const {
    std::lock_guard lock(control_);
    return {200,
            {{"scenario", dataio::scenario_to_json(scenario_)},
             {"scenario_hash", scenario_hash_},
             {"condition_number", finite_or_null(condition_number_)}}};
}

Response Service::put_scenario(std::string_view body) {
    std::lock_guard lock(control_);
    reap_locked();
    if (active_) return error_response(409, "a run is active; stop it before changing the scenario");

    Scenario next;
    double cond = 0.0;
    try {
        next = dataio::load_scenario(body);
        const field::FieldModel model(geometry::validate_layout(next.layout));
        const auto report = coupling::condition_report(model);
        if (report.singular)
            return error_response(422, "degenerate sensor placement: coupling matrix is singular");
        if (report.condition_number > next.cond_limit)
            return error_response(422, IllConditionedError(report.condition_number, next.cond_limit).what());
        cond = report.condition_number;
    } catch (const ParseError& e) {
        return error_response(400, e.what());
    } catch (const ValidationError& e) {
        return error_response(422, "scenario validation failed", e.problems());
    } catch (const NumericError& e) {
        return error_response(422, e.what());
    }

    scenario_ = std::move(next);
    scenario_hash_ = dataio::scenario_hash(scenario_);
    condition_number_ = cond;
    spdlog::info("scenario '{}' active (hash {}, condition number {:.4g})", scenario_.name, scenario_hash_, cond);
    return {200,
            {{"scenario", dataio::scenario_to_json(scenario_)},
             {"scenario_hash", scenario_hash_},
             {"condition_number", finite_or_null(cond)}}};
}

Response Service::start_run(std::string_view body) {
    std::lock_guard lock(control_);
    reap_locked();
    if (active_) return error_response(409, "a run is already active");

    auto run = std::make_unique<ActiveRun>();
    run->scenario = scenario_;
    run->hash = scenario_hash_;
    run->frame_limit = config_.max_run_frames;

    std::vector<std::string> problems;
    if (body.find_first_not_of(" \t\r\n") != std::string_view::npos) {
        json params;
        try {
            params = json::parse(body.begin(), body.end());
        } catch (const json::parse_error& e) {
            return error_response(400, fmt::format("malformed run request: {}", e.what()));
        }
        if (!params.is_object()) return error_response(422, "run request must be a JSON object");
        for (const auto& [key, value] : params.items()) {
            if (key == "mode") {
                if (value == "replay")
                    run->replay = true;
                else if (value != "simulate")
                    problems.push_back("mode: expected 'simulate' or 'replay'");
            } else if (key == "frames") {
                if (!value.is_number_unsigned() || value.get<std::size_t>() == 0)
                    problems.emplace_back("frames: expected a positive integer");
                else
                    run->frame_limit = value.get<std::size_t>();
            } else if (key == "frames_file") {
                if (!value.is_string())
                    problems.emplace_back("frames_file: expected a path");
                else
                    run->frames_file = value.get<std::string>();
            } else if (key == "speed") {
                if (!value.is_number() || value.get<double>() < 0.0)
                    problems.emplace_back("speed: expected a non-negative number (0 = unthrottled)");
                else
                    run->speed = value.get<double>();
            } else {
                problems.push_back(fmt::format("unknown key '{}'", key));
            }
        }
    }
    if (run->replay) {
        if (run->frames_file.empty())
            problems.emplace_back("replay needs a frames_file");
        else if (!std::filesystem::is_regular_file(run->frames_file))
            problems.push_back(fmt::format("frames_file not found: {}", run->frames_file.string()));
    }
    if (!problems.empty()) return error_response(422, "invalid run request", std::move(problems));

    run->id = fmt::format("{}-{}-{}", scenario_.name, timestamp_now(), ++run_counter_);
    {
        std::lock_guard sub_lock(subscribers_mutex_);
        subscribers_.clear();
    }
    ActiveRun& ref = *run;
    active_ = std::move(run);
    active_->thread = std::thread([this, &ref] { run_main(ref); });
    spdlog::info("run {} started ({})", ref.id, ref.replay ? "replay" : "simulate");
    return {200,
            {{"id", ref.id},
             {"status", "running"},
             {"mode", ref.replay ? "replay" : "simulate"},
             {"scenario_hash", ref.hash}}};
}

Response Service::stop_run() {
    std::lock_guard lock(control_);
    reap_locked();
    if (!active_) return error_response(409, "no active run");
    active_->stop = true;
    active_->thread.join();
    auto run = std::move(active_);
    if (!run->error.empty()) return error_response(500, run->error);
    spdlog::info("run {} stopped", run->id);
    return {200, run->summary};
}

Response Service::list_runs() const {
    json runs = json::array();
    std::error_code ec;
    if (std::filesystem::is_directory(config_.runs_dir, ec)) {
        std::vector<std::filesystem::path> dirs;
        for (const auto& entry : std::filesystem::directory_iterator(config_.runs_dir, ec))
            if (entry.is_directory() && std::filesystem::exists(entry.path() / "run.json")) dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            try {
                const auto doc = json::parse(dataio::read_text_file(dir / "run.json"));
                runs.push_back({{"id", doc.at("id")},
                                {"scenario", doc.at("scenario").at("name")},
                                {"scenario_hash", doc.at("scenario_hash")},
                                {"frames", doc.at("frames").at("count")},
                                {"metrics", doc.at("metrics")}});
            } catch (const std::exception& e) {
                spdlog::warn("skipping {}: {}", dir.string(), e.what());
            }
        }
    }
    return {200, {{"runs", runs}}};
}

Response Service::get_run(std::string_view id) const {
    if (!valid_run_id(id)) return error_response(400, "invalid run id");
    const auto manifest = config_.runs_dir / std::string(id) / "run.json";
    if (!std::filesystem::exists(manifest)) return error_response(404, fmt::format("no run '{}'", id));
    try {
        return {200, json::parse(dataio::read_text_file(manifest))};
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

std::shared_ptr<stream::Subscriber> Service::subscribe(unsigned mask) {
    auto sub = std::make_shared<stream::Subscriber>(mask, config_.outbox_capacity);
    std::lock_guard lock(control_);
    std::lock_guard sub_lock(subscribers_mutex_);
    if (active_ && !active_->finished.load()) {
        subscribers_.push_back(sub);
    } else {
        sub->finish("idle");
    }
    return sub;
}

bool Service::running() const {
    std::lock_guard lock(control_);
    return active_ && !active_->finished.load();
}

bool Service::wait_idle(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    while (running()) {
        if (Clock::now() >= deadline) return false;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return true;
}

void Service::shutdown() {
    {
        std::lock_guard lock(control_);
        if (active_) {
            active_->stop = true;
            if (active_->thread.joinable()) active_->thread.join();
            active_.reset();
        }
    }
    end_streams("shutdown", {});
}

std::string Service::active_scenario_hash() const {
    std::lock_guard lock(control_);
    return scenario_hash_;
}

void Service::reap_locked() {
    if (active_ && active_->finished.load()) {
        if (active_->thread.joinable()) active_->thread.join();
        active_.reset();
    }
}

void Service::broadcast(const stream::Broadcast& b) {
    std::lock_guard lock(subscribers_mutex_);
    std::erase_if(subscribers_, [&](const std::weak_ptr<stream::Subscriber>& w) {
        auto sub = w.lock();
        if (!sub) return true;
        sub->offer(b);
        return false;
    });
}

void Service::end_streams(std::string_view reason, std::string_view run_id) {
    std::lock_guard lock(subscribers_mutex_);
    for (auto& w : subscribers_)
        if (auto sub = w.lock()) sub->finish(reason, run_id);
    subscribers_.clear();
}

void Service::run_main(ActiveRun& run) {
    try {
        const Scenario& s = run.scenario;
        auto model = std::make_shared<const field::FieldModel>(geometry::validate_layout(s.layout));
        auto ctx = std::make_shared<const pipeline::RecoveryContext>(
            pipeline::make_context(*model, s.sensors, s.cond_limit));

        pipeline::RunRecord rec;
        rec.id = run.id;
        rec.scenario = s;
        rec.matrix = ctx->matrix;
        rec.inverse = ctx->inverse;

        const auto wall_start = Clock::now();
        auto pace = [&](double signal_offset) {
            if (run.speed <= 0.0) return;
            const auto target =
                wall_start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(signal_offset / run.speed));
            if (Clock::now() < target) std::this_thread::sleep_until(target);
        };

        std::unique_ptr<pipeline::SimulatedSource> sim;
        std::ifstream file;
        std::unique_ptr<dataio::FrameReader> reader;
        std::optional<double> first_t;
        std::size_t produced = 0;
        if (run.replay) {
            file.open(run.frames_file, std::ios::binary);
            if (!file) throw IoError("cannot open for reading", run.frames_file.string());
            reader = std::make_unique<dataio::FrameReader>(file);
        } else {
            sim = std::make_unique<pipeline::SimulatedSource>(s, model);
        }

        pipeline::StreamingPipeline::Source source = [&]() -> std::optional<pipeline::Frame> {
            if (run.stop.load() || produced >= run.frame_limit) return std::nullopt;
            std::optional<pipeline::Frame> frame;
            if (sim) {
                frame = sim->next();
            } else {
                frame = reader->next();
                if (!frame) return std::nullopt;
            }
            if (!first_t) first_t = frame->t;
            pace(frame->t - *first_t);
            ++produced;
            return frame;
        };

        stream::Decimator decimator(s.grid.rate_hz, config_.envelopes_per_second);
        metrics::NmaeAccumulator running_nmae;
        auto emit = [&](const stream::Interval& iv) {
            stream::Broadcast b;
            b.interval = &iv;
            for (Phase p : kPhases) b.nmae[index_of(p)] = running_nmae.nmae(p);
            b.run_id = run.id;
            b.scenario_hash = run.hash;
            broadcast(b);
        };

        pipeline::StreamingPipeline pipe(ctx, {.queue_capacity = config_.queue_capacity, .drop_oldest = run.speed > 0.0});
        pipe.add_sink([&](const pipeline::Frame& in, const pipeline::RecoveredFrame& out) {
            rec.inputs.push_back(in);
            rec.frames.push_back(out);
            if (out.measured) running_nmae.add(out.calculated.values(), out.measured->values());
            if (auto iv = decimator.add(out)) emit(*iv);
        });
        rec.diagnostics = pipe.run(source);
        if (auto iv = decimator.flush()) emit(*iv);

        const double total = std::chrono::duration<double>(Clock::now() - wall_start).count();
        rec.timing = pipeline::make_timing(rec.frames.size(), pipe.compute_seconds(), total, s.grid.rate_hz,
                                           s.load.fundamental_hz);
        rec.table = metrics::build_table(rec);
        const auto manifest = dataio::write_run(rec, config_.runs_dir / rec.id);

        run.summary = {{"id", rec.id},
                       {"status", "stopped"},
                       {"frames", rec.frames.size()},
                       {"dropped", rec.diagnostics.dropped},
                       {"scenario_hash", run.hash},
                       {"path", manifest.string()},
                       {"metrics", dataio::table_to_json(rec.table)}};
        spdlog::info("run {} persisted to {}", rec.id, manifest.string());
    } catch (const std::exception& e) {
        run.error = e.what();
        spdlog::error("run {} failed: {}", run.id, e.what());
    }
    end_streams(run.error.empty() ? "run finished" : "run failed", run.id);
    run.finished = true;
}

}  // namespace linesense::service
