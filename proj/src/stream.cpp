#include "linesense/stream.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace linesense::stream {

using nlohmann::json;

namespace {

void accumulate(GroupStats& g, const std::array<double, 4>& v, bool first) {
    for (std::size_t k = 0; k < 4; ++k) {
        if (first) {
            g[k] = {v[k], v[k], v[k]};
        } else {
            g[k].min = std::min(g[k].min, v[k]);
            g[k].max = std::max(g[k].max, v[k]);
            g[k].sum += v[k];
        }
    }
}

json group_json(const GroupStats& g, std::size_t n, const std::array<const char*, 4>& names) {
    json out = json::object();
    for (std::size_t k = 0; k < 4; ++k) out[names[k]] = {{"min", g[k].min}, {"max", g[k].max}, {"mean", g[k].mean(n)}};
    return out;
}

constexpr std::array<const char*, 4> kFieldNames{"bx1", "bz1", "bx2", "bz2"};
constexpr std::array<const char*, 4> kPhaseNames{"A", "B", "C", "N"};

}  // namespace

unsigned parse_mask(std::string_view text) {
    if (text.empty()) return kAllSignals;
    unsigned mask = 0;
    std::vector<std::string> unknown;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = std::min(text.find(',', pos), text.size());
        const auto token = text.substr(pos, comma - pos);
        pos = comma + 1;
        if (token.empty()) continue;
        if (token == "measured_field") mask |= kMeasuredField;
        else if (token == "calculated_field") mask |= kCalculatedField;
        else if (token == "fields") mask |= kMeasuredField | kCalculatedField;
        else if (token == "measured_current") mask |= kMeasuredCurrent;
        else if (token == "calculated_current") mask |= kCalculatedCurrent;
        else if (token == "currents") mask |= kMeasuredCurrent | kCalculatedCurrent;
        else if (token == "residuals") mask |= kResidual;
        else if (token == "nmae") mask |= kNmae;
        else if (token == "all") mask |= kAllSignals;
        else unknown.push_back(fmt::format("unknown signal '{}'", token));
    }
    if (!unknown.empty()) throw ValidationError(std::move(unknown));
    return mask == 0 ? kAllSignals : mask;
}

Decimator::Decimator(double rate_hz, double max_envelopes_per_second) {
    if (!(rate_hz > 0.0) || !(max_envelopes_per_second > 0.0))
        throw ValidationError("decimator needs positive sample and envelope rates");
    interval_ = static_cast<std::size_t>(std::ceil(rate_hz / max_envelopes_per_second));
    interval_ = std::max<std::size_t>(interval_, 1);
}

std::optional<Interval> Decimator::add(const pipeline::RecoveredFrame& f) {
    const bool first = current_.count == 0;
    if (first) {
        current_.t_first = f.t;
        current_.has_reference = f.measured.has_value() && f.residual.has_value() && f.modeled_fields.has_value();
    }
    current_.t_last = f.t;
    accumulate(current_.measured_field, f.fields.components(), first);
    accumulate(current_.calculated_current, f.calculated.values(), first);
    if (current_.has_reference) {
        accumulate(current_.calculated_field, f.modeled_fields->components(), first);
        accumulate(current_.measured_current, f.measured->values(), first);
        accumulate(current_.residual, *f.residual, first);
    }
    ++current_.count;
    if (current_.count < interval_) return std::nullopt;
    return flush();
}

std::optional<Interval> Decimator::flush() {
    if (current_.count == 0) return std::nullopt;
    Interval done = current_;
    current_ = Interval{};
    return done;
}

json envelope_json(const Broadcast& b, unsigned mask, std::uint64_t seq) {
    const Interval& iv = *b.interval;
    json env = {{"type", "frame"},
                {"seq", seq},
                {"run_id", b.run_id},
                {"scenario_hash", b.scenario_hash},
                {"t", iv.t_last},
                {"t_first", iv.t_first},
                {"t_last", iv.t_last},
                {"samples", iv.count}};
    const std::size_t n = iv.count;
    if (mask & kMeasuredField) env["measured_field"] = group_json(iv.measured_field, n, kFieldNames);
    if (mask & kCalculatedCurrent) env["calculated_current"] = group_json(iv.calculated_current, n, kPhaseNames);
    if (iv.has_reference) {
        if (mask & kCalculatedField) env["calculated_field"] = group_json(iv.calculated_field, n, kFieldNames);
        if (mask & kMeasuredCurrent) env["measured_current"] = group_json(iv.measured_current, n, kPhaseNames);
        if (mask & kResidual) env["residual"] = group_json(iv.residual, n, kPhaseNames);
    }
    if (mask & kNmae) {
        json nm = json::object();
        for (std::size_t k = 0; k < 4; ++k) nm[kPhaseNames[k]] = b.nmae[k] ? json(*b.nmae[k]) : json(nullptr);
        env["nmae"] = nm;
    }
    return env;
}

Subscriber::Subscriber(unsigned mask, std::size_t capacity) : mask_(mask), capacity_(std::max<std::size_t>(capacity, 2)) {}

void Subscriber::push_drop_notice_locked() {
    json notice = {{"type", "drop"}, {"seq", next_seq_++}, {"dropped", pending_drops_}};
    outbox_.push_back(notice.dump());
    pending_drops_ = 0;
}

void Subscriber::offer(const Broadcast& b) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        const std::size_t needed = pending_drops_ > 0 ? 2 : 1;
        if (outbox_.size() + needed > capacity_) {
            ++pending_drops_;
            ++dropped_total_;
            return;
        }
        if (pending_drops_ > 0) push_drop_notice_locked();
        outbox_.push_back(envelope_json(b, mask_, next_seq_++).dump());
    }
    ready_.notify_one();
}

void Subscriber::finish(std::string_view reason, std::string_view run_id) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        if (pending_drops_ > 0) push_drop_notice_locked();
        json end = {{"type", "end"}, {"seq", next_seq_++}, {"reason", reason}};
        if (!run_id.empty()) end["run_id"] = run_id;
        outbox_.push_back(end.dump());
        closed_ = true;
    }
    ready_.notify_all();
}

void Subscriber::cancel() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
        outbox_.clear();
    }
    ready_.notify_all();
}

std::optional<std::string> Subscriber::pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return closed_ || !outbox_.empty(); });
    if (outbox_.empty()) return std::nullopt;
    std::string msg = std::move(outbox_.front());
    outbox_.pop_front();
    return msg;
}

std::uint64_t Subscriber::dropped_total() const {
    std::lock_guard lock(mutex_);
    return dropped_total_;
}

}  // namespace linesense::stream
