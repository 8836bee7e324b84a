#include "linesense/pipeline.hpp"

#include "linesense/errors.hpp"
#include "linesense/report.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <thread>

namespace linesense::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr std::size_t kMaxMessages = 20;

// Keeps the timed loop in benchmark() observable.
volatile double benchmark_sink = 0.0;

}  // namespace

void Diagnostics::note(std::string message) {
    if (messages.size() < kMaxMessages) messages.push_back(std::move(message));
}

RecoveryContext make_context(const field::FieldModel& model, const SensorSuite& sensors, double cond_limit) {
    RecoveryContext ctx;
    ctx.matrix = coupling::build_coupling_matrix(model);
    ctx.inverse = coupling::invert(ctx.matrix, cond_limit);
    if (ctx.inverse.least_squares) throw ValidationError("the streaming pipeline needs exactly 2 sensor heads");
    ctx.specs = sensors.gmr;
    ctx.hall = sensors.hall;
    for (std::size_t k = 0; k < 4; ++k) ctx.mfdf[k] = ctx.specs[k].mfdf();
    return ctx;
}

std::optional<RecoveredFrame> process_frame(const Frame& frame, const RecoveryContext& ctx, Diagnostics* diag) {
    auto reject = [&](std::string_view what, std::size_t channel) -> std::optional<RecoveredFrame> {
        if (diag != nullptr) {
            ++diag->rejected;
            diag->note(fmt::format("frame t={}: non-finite {} on channel {}", frame.t, what, channel + 1));
        }
        return std::nullopt;
    };
    if (!std::isfinite(frame.t)) return reject("timestamp", 0);
    for (std::size_t k = 0; k < 4; ++k)
        if (!std::isfinite(frame.gmr_volts[k])) return reject("GMR voltage", k);
    if (frame.hall_volts)
        for (std::size_t k = 0; k < 4; ++k)
            if (!std::isfinite((*frame.hall_volts)[k])) return reject("Hall voltage", k);

    RecoveredFrame out;
    out.t = frame.t;
    std::array<double, 4> b{};
    bool saturated = false;
    for (std::size_t k = 0; k < 4; ++k) {
        b[k] = frame.gmr_volts[k] * ctx.mfdf[k];
        saturated = saturated || sensor::exceeds_full_scale(frame.gmr_volts[k], ctx.specs[k]);
    }
    out.fields = field::FieldSample::from_components(frame.t, b);
    out.calculated = coupling::recover_currents(ctx.inverse, frame.t, b);

    if (frame.hall_volts) {
        std::array<double, 4> meas{};
        std::array<double, 4> res{};
        const auto calc = out.calculated.values();
        for (std::size_t p = 0; p < 4; ++p) {
            meas[p] = sensor::hall_voltage_to_current((*frame.hall_volts)[p], ctx.hall);
            res[p] = calc[p] - meas[p];
        }
        out.measured = field::PhaseCurrents::from_values(frame.t, meas);
        out.residual = res;

        std::array<double, 4> modeled{};
        for (std::size_t r = 0; r < 4; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < 4; ++c)
                acc += ctx.matrix.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * meas[c];
            modeled[r] = kMu0Over4Pi * acc;
        }
        out.modeled_fields = field::FieldSample::from_components(frame.t, modeled);
    }

    if (diag != nullptr) {
        ++diag->processed;
        if (saturated) ++diag->saturated;
    }
    return out;
}

SimulatedSource::SimulatedSource(const Scenario& scenario, std::shared_ptr<const field::FieldModel> model)
    : load_(scenario.load),
      grid_(scenario.grid),
      specs_(effective_specs(scenario)),
      hall_(scenario.sensors.hall),
      model_(std::move(model)),
      rng_(scenario.seed) {
    if (!model_ || model_->head_count() != 2) throw ValidationError("simulation needs a 2-head field model");
}

Frame SimulatedSource::next() {
    const double t = grid_.time(next_index_++);
    truth_ = waveform::evaluate(load_, t);
    const auto fields = field::forward_field(*model_, truth_);

    Frame frame;
    frame.t = t;
    for (std::size_t k = 0; k < 4; ++k) {
        const double b = sensor::sensed_component(fields, k, specs_[k].misalignment);
        frame.gmr_volts[k] = sensor::field_to_voltage(b, specs_[k], &rng_);
    }
    std::array<double, 4> hall{};
    const auto i = truth_.values();
    for (std::size_t p = 0; p < 4; ++p) hall[p] = sensor::hall_current_to_voltage(i[p], hall_);
    frame.hall_volts = hall;
    return frame;
}

TimingReport make_timing(std::size_t frames, double compute_seconds, double total_seconds, double rate_hz,
                         double fundamental_hz) {
    TimingReport t;
    t.frames = frames;
    t.compute_seconds = compute_seconds;
    t.total_seconds = total_seconds;
    if (frames > 0) {
        t.per_frame_seconds = compute_seconds / static_cast<double>(frames);
        if (compute_seconds > 0.0) t.samples_per_second = static_cast<double>(frames) / compute_seconds;
        if (fundamental_hz > 0.0) t.per_cycle_seconds = t.per_frame_seconds * rate_hz / fundamental_hz;
    }
    return t;
}

StreamingPipeline::StreamingPipeline(std::shared_ptr<const RecoveryContext> ctx, Options options)
    : ctx_(std::move(ctx)), options_(options) {
    if (!ctx_) throw ValidationError("pipeline needs a recovery context");
}

void StreamingPipeline::add_sink(Sink sink) { sinks_.push_back(std::move(sink)); }

Diagnostics StreamingPipeline::run(const Source& source) {
    BoundedQueue<Frame> queue(options_.queue_capacity);
    std::atomic<std::size_t> dropped{0};
    std::exception_ptr producer_error;

    std::thread producer([&] {
        try {
            while (!stop_requested_.load()) {
                auto frame = source();
                if (!frame) break;
                if (options_.drop_oldest) {
                    const auto evicted = queue.push_drop_oldest(std::move(*frame));
                    if (!evicted) break;
                    dropped += *evicted;
                } else if (!queue.push(std::move(*frame))) {
                    break;
                }
            }
        } catch (...) {
            producer_error = std::current_exception();
        }
        queue.close();
    });

    Diagnostics diag;
    compute_seconds_ = 0.0;
    try {
        while (auto frame = queue.pop()) {
            const auto start = Clock::now();
            auto recovered = process_frame(*frame, *ctx_, &diag);
            compute_seconds_ += seconds_since(start);
            if (!recovered) continue;
            for (const auto& sink : sinks_) sink(*frame, *recovered);
        }
    } catch (...) {
        stop();
        queue.close();
        producer.join();
        throw;
    }
    producer.join();
    if (producer_error) std::rethrow_exception(producer_error);
    diag.dropped = dropped.load();
    return diag;
}

namespace {

RunRecord run_stream(const Scenario& scenario, std::shared_ptr<const RecoveryContext> ctx,
                     const StreamingPipeline::Source& source, std::size_t expected, std::size_t queue_capacity) {
    RunRecord run;
    run.id = fmt::format("{}-seed{}", scenario.name, scenario.seed);
    run.scenario = scenario;
    run.matrix = ctx->matrix;
    run.inverse = ctx->inverse;
    run.inputs.reserve(expected);
    run.frames.reserve(expected);

    StreamingPipeline pipe(ctx, {.queue_capacity = queue_capacity, .drop_oldest = false});
    pipe.add_sink([&run](const Frame& in, const RecoveredFrame& out) {
        run.inputs.push_back(in);
        run.frames.push_back(out);
    });

    const auto start = Clock::now();
    run.diagnostics = pipe.run(source);
    const double total = seconds_since(start);

    run.timing = make_timing(run.frames.size(), pipe.compute_seconds(), total, scenario.grid.rate_hz,
                             scenario.load.fundamental_hz);
    run.table = metrics::build_table(run);
    return run;
}

}  // namespace

RunRecord run_simulation(const Scenario& scenario, const SimulationOptions& options) {
    validate_scenario(scenario);
    auto model = std::make_shared<const field::FieldModel>(geometry::validate_layout(scenario.layout));
    auto ctx = std::make_shared<const RecoveryContext>(make_context(*model, scenario.sensors, scenario.cond_limit));

    SimulatedSource sim(scenario, model);
    const std::size_t n = scenario.grid.n_samples;
    auto source = [&]() -> std::optional<Frame> {
        if (sim.position() >= n) return std::nullopt;
        return sim.next();
    };
    return run_stream(scenario, ctx, source, n, options.queue_capacity);
}

RunRecord run_replay(const Scenario& scenario, const std::vector<Frame>& frames) {
    validate_scenario(scenario);
    const field::FieldModel model(geometry::validate_layout(scenario.layout));
    auto ctx = std::make_shared<const RecoveryContext>(make_context(model, scenario.sensors, scenario.cond_limit));

    std::size_t next = 0;
    auto source = [&]() -> std::optional<Frame> {
        if (next >= frames.size()) return std::nullopt;
        return frames[next++];
    };
    Scenario replayed = scenario;
    replayed.grid.n_samples = frames.size();
    if (!frames.empty()) replayed.grid.t0 = frames.front().t;
    return run_stream(replayed, ctx, source, frames.size(), 1024);
}

std::vector<BenchRow> benchmark(const Scenario& scenario, const std::vector<waveform::SampleGrid>& grids,
                                int repetitions) {
    validate_scenario(scenario);
    auto model = std::make_shared<const field::FieldModel>(geometry::validate_layout(scenario.layout));
    const auto ctx = make_context(*model, scenario.sensors, scenario.cond_limit);

    std::vector<BenchRow> rows;
    for (const auto& grid : grids) {
        Scenario s = scenario;
        s.grid = grid;
        SimulatedSource sim(s, model);
        std::vector<Frame> frames;
        frames.reserve(grid.n_samples);
        for (std::size_t k = 0; k < grid.n_samples; ++k) frames.push_back(sim.next());
        std::vector<RecoveredFrame> out(grid.n_samples);

        BenchRow row;
        row.rate_hz = grid.rate_hz;
        row.frames = grid.n_samples;
        double best = 0.0;
        double checksum = 0.0;
        for (int rep = 0; rep < std::max(repetitions, 1); ++rep) {
            const auto start = Clock::now();
            for (std::size_t k = 0; k < frames.size(); ++k) {
                if (auto r = process_frame(frames[k], ctx)) out[k] = *r;
            }
            const double elapsed = seconds_since(start);
            best = rep == 0 ? elapsed : std::min(best, elapsed);
            for (const auto& r : out) checksum += r.calculated.i_a;
        }
        benchmark_sink = checksum;
        row.compute_seconds = best;
        if (row.frames > 0) {
            row.per_frame_seconds = best / static_cast<double>(row.frames);
            if (best > 0.0) row.samples_per_second = static_cast<double>(row.frames) / best;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace linesense::pipeline
