#pragma once

// Real-time recovery loop: GMR voltages -> fields (MFDF) -> currents through
// the precomputed inverse coupling matrix, one constant-time step per frame.
//
// Streaming layout: one producer (simulator or file replay) feeds a bounded
// queue; one consumer runs process_frame and fans results out to sinks.

#include "linesense/bounded_queue.hpp"
#include "linesense/coupling.hpp"
#include "linesense/metrics.hpp"
#include "linesense/scenario.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace linesense::pipeline {

// Raw DAQ sample: OT1..OT4 GMR outputs and optional Hall outputs (A, B, C, N).
struct Frame {
    double t = 0.0;
    std::array<double, 4> gmr_volts{};
    std::optional<std::array<double, 4>> hall_volts;
};

struct RecoveredFrame {
    double t = 0.0;
    field::FieldSample fields;                 // GMR-measured
    field::PhaseCurrents calculated;           // recovered through the inverse
    std::optional<field::PhaseCurrents> measured;  // Hall reference
    std::optional<std::array<double, 4>> residual;  // calculated - measured
    std::optional<field::FieldSample> modeled_fields;  // forward model of the measured currents
};

struct Diagnostics {
    std::size_t processed = 0;
    std::size_t rejected = 0;
    std::size_t dropped = 0;     // evicted by a drop-oldest real-time source
    std::size_t saturated = 0;   // frames with a channel beyond GMR full scale
    std::vector<std::string> messages;  // first few rejection reasons

    void note(std::string message);
};

// Immutable recovery state shared read-only by every stage.
struct RecoveryContext {
    coupling::CouplingMatrix matrix;
    coupling::InverseCouplingMatrix inverse;
    std::array<sensor::GmrSpec, 4> specs{};
    sensor::HallSpec hall{};
    std::array<double, 4> mfdf{};  // T/V per channel, from specs
};

RecoveryContext make_context(const field::FieldModel& model, const SensorSuite& sensors,
                             double cond_limit = coupling::kDefaultConditionLimit);

// Returns nullopt (and counts the reason in diag) for frames with non-finite
// values. Allocation free.
std::optional<RecoveredFrame> process_frame(const Frame& frame, const RecoveryContext& ctx,
                                            Diagnostics* diag = nullptr);

// Frame generator for a scenario: synthesized currents -> forward field ->
// misaligned, noisy GMR voltages; Hall channels carry the true currents.
class SimulatedSource {
public:
    SimulatedSource(const Scenario& scenario, std::shared_ptr<const field::FieldModel> model);

    // Frame k of the (unbounded) sample sequence; call with k = 0, 1, 2, ...
    Frame next();
    std::size_t position() const noexcept { return next_index_; }
    const field::PhaseCurrents& last_truth() const noexcept { return truth_; }

private:
    waveform::LoadScenario load_;
    waveform::SampleGrid grid_;
    std::array<sensor::GmrSpec, 4> specs_;
    sensor::HallSpec hall_;
    std::shared_ptr<const field::FieldModel> model_;
    std::mt19937_64 rng_;
    std::size_t next_index_ = 0;
    field::PhaseCurrents truth_;
};

struct TimingReport {
    std::size_t frames = 0;
    double compute_seconds = 0.0;  // voltage -> field -> current only
    double total_seconds = 0.0;    // whole run including generation and sinks
    double per_frame_seconds = 0.0;
    double samples_per_second = 0.0;
    double per_cycle_seconds = 0.0;  // compute time of one fundamental cycle

    friend bool operator==(const TimingReport&, const TimingReport&) = default;
};

TimingReport make_timing(std::size_t frames, double compute_seconds, double total_seconds, double rate_hz,
                         double fundamental_hz);

struct RunRecord {
    std::string id;
    Scenario scenario;
    coupling::CouplingMatrix matrix;
    coupling::InverseCouplingMatrix inverse;
    std::vector<Frame> inputs;            // frames that were processed, in order
    std::vector<RecoveredFrame> frames;   // same length as inputs
    metrics::ComparisonTable table;
    TimingReport timing;
    Diagnostics diagnostics;
};

// Single-producer / single-consumer stream with sink fan-out.
class StreamingPipeline {
public:
    using Source = std::function<std::optional<Frame>()>;
    using Sink = std::function<void(const Frame&, const RecoveredFrame&)>;

    struct Options {
        std::size_t queue_capacity = 1024;
        bool drop_oldest = false;  // real-time sources: evict instead of blocking
    };

    StreamingPipeline(std::shared_ptr<const RecoveryContext> ctx, Options options);

    void add_sink(Sink sink);

    // Producer on a worker thread, consumer on the calling thread. Returns
    // after the source ends (or stop()) and the queue is drained.
    Diagnostics run(const Source& source);

    // Thread safe; the producer stops at its next frame.
    void stop() noexcept { stop_requested_.store(true); }
    bool stop_requested() const noexcept { return stop_requested_.load(); }

    double compute_seconds() const noexcept { return compute_seconds_; }

private:
    std::shared_ptr<const RecoveryContext> ctx_;
    Options options_;
    std::vector<Sink> sinks_;
    std::atomic<bool> stop_requested_{false};
    double compute_seconds_ = 0.0;
};

struct SimulationOptions {
    std::size_t queue_capacity = 1024;
};

// Synthesize -> forward -> inject errors -> stream through process_frame ->
// metrics. Throws ValidationError / NumericError on bad scenarios.
RunRecord run_simulation(const Scenario& scenario, const SimulationOptions& options = {});

// Recovery over recorded frames (no synthesis).
RunRecord run_replay(const Scenario& scenario, const std::vector<Frame>& frames);

struct BenchRow {
    double rate_hz = 0.0;
    std::size_t frames = 0;
    double compute_seconds = 0.0;  // best of the repetitions
    double per_frame_seconds = 0.0;
    double samples_per_second = 0.0;
};

// Times the compute stage alone for each grid size; frames are generated
// beforehand and not timed.
std::vector<BenchRow> benchmark(const Scenario& scenario, const std::vector<waveform::SampleGrid>& grids,
                                int repetitions);

}  // namespace linesense::pipeline
