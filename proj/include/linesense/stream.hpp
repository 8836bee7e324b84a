#pragma once

// UI-rate decimation of recovered frames and per-subscriber bounded outboxes.

#include "linesense/pipeline.hpp"

#include "json.hpp"

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace linesense::stream {

// Payload groups an envelope can carry.
enum Signal : unsigned {
    kMeasuredField = 1u << 0,     // GMR fields, T
    kCalculatedField = 1u << 1,   // forward model of the Hall currents, T
    kMeasuredCurrent = 1u << 2,   // Hall reference, A
    kCalculatedCurrent = 1u << 3, // recovered through the inverse, A
    kResidual = 1u << 4,          // calculated - measured, A
    kNmae = 1u << 5,              // running NMAE per phase, %
    kAllSignals = (1u << 6) - 1,
};

// Comma separated option names. The seven dashboard options are
// measured_field, calculated_field, fields, measured_current,
// calculated_current, currents, residuals; nmae and all are extra.
// Empty text selects everything. Throws ValidationError on unknown names.
unsigned parse_mask(std::string_view text);

struct Stats {
    double min = 0.0;
    double max = 0.0;
    double sum = 0.0;
    double mean(std::size_t n) const { return n == 0 ? 0.0 : sum / static_cast<double>(n); }
};

// Four channels of one payload group over one interval.
using GroupStats = std::array<Stats, 4>;

struct Interval {
    double t_first = 0.0;
    double t_last = 0.0;
    std::size_t count = 0;
    bool has_reference = false;
    GroupStats measured_field{};
    GroupStats calculated_field{};
    GroupStats measured_current{};
    GroupStats calculated_current{};
    GroupStats residual{};
};

// Groups consecutive frames into intervals of ceil(rate / max_rate) samples,
// so at most max_rate envelopes per second of signal time.
class Decimator {
public:
    explicit Decimator(double rate_hz, double max_envelopes_per_second = 60.0);

    std::size_t interval_samples() const noexcept { return interval_; }

    // Returns the finished interval when this frame completes one.
    std::optional<Interval> add(const pipeline::RecoveredFrame& frame);
    // Partial interval, if any.
    std::optional<Interval> flush();

private:
    std::size_t interval_;
    Interval current_{};
};

// Everything a subscriber needs to render one envelope under its mask.
struct Broadcast {
    const Interval* interval = nullptr;
    std::array<std::optional<double>, 4> nmae{};
    std::string_view run_id;
    std::string_view scenario_hash;
};

nlohmann::json envelope_json(const Broadcast& b, unsigned mask, std::uint64_t seq);

// Bounded outbox for one stream connection. The producer never blocks: when
// full, envelopes are discarded and counted, and a drop notice carrying the
// count precedes the next envelope that fits. seq is gapless over everything
// delivered (envelopes, drop notices, end notice).
class Subscriber {
public:
    Subscriber(unsigned mask, std::size_t capacity);

    unsigned mask() const noexcept { return mask_; }

    void offer(const Broadcast& b);
    // Queues the end-of-stream notice and closes the outbox.
    void finish(std::string_view reason, std::string_view run_id = {});
    // Consumer went away: discard everything.
    void cancel();

    // Blocks until a message is ready; nullopt once finished and drained.
    std::optional<std::string> pop();

    std::uint64_t dropped_total() const;

private:
    void push_drop_notice_locked();

    const unsigned mask_;
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<std::string> outbox_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t pending_drops_ = 0;
    std::uint64_t dropped_total_ = 0;
    bool closed_ = false;
};

}  // namespace linesense::stream
