#include "doctest.h"

#include "linesense/errors.hpp"
#include "linesense/stream.hpp"

#include <cmath>
#include <thread>

using namespace linesense;
using namespace linesense::stream;
using nlohmann::json;

namespace {

pipeline::RecoveredFrame frame_at(double t, double value, bool reference = true) {
    pipeline::RecoveredFrame f;
    f.t = t;
    f.fields = field::FieldSample::from_components(t, {value, 2 * value, 3 * value, 4 * value});
    f.calculated = field::PhaseCurrents::from_values(t, {value, -value, 0.5 * value, 0.0});
    if (reference) {
        f.measured = field::PhaseCurrents::from_values(t, {value + 1, -value, 0.5 * value, 0.0});
        f.residual = std::array<double, 4>{-1.0, 0.0, 0.0, 0.0};
        f.modeled_fields = f.fields;
    }
    return f;
}

Interval interval_of(std::size_t n, bool reference = true) {
    Decimator d(60.0 * static_cast<double>(n));
    std::optional<Interval> out;
    for (std::size_t k = 0; k < n; ++k) out = d.add(frame_at(static_cast<double>(k), static_cast<double>(k), reference));
    return *out;
}

json pop_json(Subscriber& s) {
    auto msg = s.pop();
    REQUIRE(msg);
    return json::parse(*msg);
}

}  // namespace

TEST_CASE("mask parsing") {
    CHECK(parse_mask("") == kAllSignals);
    CHECK(parse_mask("all") == kAllSignals);
    CHECK(parse_mask("measured_field") == kMeasuredField);
    CHECK(parse_mask("fields") == (kMeasuredField | kCalculatedField));
    CHECK(parse_mask("currents") == (kMeasuredCurrent | kCalculatedCurrent));
    CHECK(parse_mask("residuals,nmae") == (kResidual | kNmae));
    CHECK(parse_mask("calculated_current,,measured_current") == (kMeasuredCurrent | kCalculatedCurrent));
    try {
        parse_mask("fields,volume,bass");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.problems().size() == 2);
    }
}

TEST_CASE("decimator interval length caps the envelope rate") {
    CHECK(Decimator(28000.0).interval_samples() == 467);
    CHECK(Decimator(60.0).interval_samples() == 1);
    CHECK(Decimator(10.0).interval_samples() == 1);
    CHECK(Decimator(1e5).interval_samples() == 1667);
    for (double rate : {1000.0, 28000.0, 44100.0, 1e5}) {
        const Decimator d(rate);
        CHECK(rate / static_cast<double>(d.interval_samples()) <= 60.0);
    }
    CHECK_THROWS_AS(Decimator(0.0), ValidationError);
}

TEST_CASE("decimator emits per interval and flushes the remainder") {
    Decimator d(28000.0);
    std::size_t emitted = 0;
    std::size_t covered = 0;
    for (std::size_t k = 0; k < 28000; ++k) {
        if (auto iv = d.add(frame_at(k / 28000.0, 1.0))) {
            ++emitted;
            covered += iv->count;
        }
    }
    CHECK(emitted == 59);
    const auto rest = d.flush();
    REQUIRE(rest);
    CHECK(covered + rest->count == 28000);
    CHECK_FALSE(d.flush());
}

TEST_CASE("decimated min/max/mean of a sine match a direct computation") {
    const double rate = 28000.0;
    Decimator d(rate);
    std::vector<double> block;
    for (std::size_t k = 0; k < 2000; ++k) {
        const double v = 10.0 * std::sin(2.0 * std::numbers::pi * 50.0 * k / rate);
        block.push_back(v);
        if (auto iv = d.add(frame_at(k / rate, v))) {
            REQUIRE(iv->count == block.size());
            const auto [lo, hi] = std::minmax_element(block.begin(), block.end());
            double sum = 0.0;
            for (double x : block) sum += x;
            CHECK(iv->calculated_current[0].min == *lo);
            CHECK(iv->calculated_current[0].max == *hi);
            CHECK(iv->calculated_current[0].mean(iv->count) == doctest::Approx(sum / block.size()).epsilon(1e-12));
            CHECK(iv->measured_field[3].max == 4.0 * *hi);
            CHECK(iv->t_first == doctest::Approx((k + 1 - block.size()) / rate));
            CHECK(iv->t_last == doctest::Approx(k / rate));
            block.clear();
        }
    }
}

TEST_CASE("envelope carries only the masked groups") {
    const auto iv = interval_of(4);
    Broadcast b{&iv, {5.0, std::nullopt, 1.0, 2.0}, "run-1", "abc"};
    const auto all = envelope_json(b, kAllSignals, 7);
    CHECK(all["type"] == "frame");
    CHECK(all["seq"] == 7);
    CHECK(all["run_id"] == "run-1");
    CHECK(all["scenario_hash"] == "abc");
    CHECK(all["samples"] == 4);
    for (const char* g : {"measured_field", "calculated_field", "measured_current", "calculated_current", "residual", "nmae"})
        CHECK(all.contains(g));
    CHECK(all["nmae"]["B"].is_null());
    CHECK(all["measured_field"]["bz2"]["max"] == 12.0);
    CHECK(all["calculated_current"]["A"]["mean"] == 1.5);

    const auto only = envelope_json(b, parse_mask("calculated_current"), 0);
    CHECK(only.contains("calculated_current"));
    for (const char* g : {"measured_field", "calculated_field", "measured_current", "residual", "nmae"})
        CHECK_FALSE(only.contains(g));
}

TEST_CASE("without a reference the reference groups are omitted") {
    const auto iv = interval_of(3, false);
    CHECK_FALSE(iv.has_reference);
    Broadcast b{&iv, {}, "r", "h"};
    const auto env = envelope_json(b, kAllSignals, 0);
    CHECK(env.contains("measured_field"));
    CHECK(env.contains("calculated_current"));
    CHECK_FALSE(env.contains("measured_current"));
    CHECK_FALSE(env.contains("residual"));
    CHECK_FALSE(env.contains("calculated_field"));
}

TEST_CASE("subscriber delivers in order with gapless seq") {
    const auto iv = interval_of(2);
    Subscriber s(kAllSignals, 8);
    for (int k = 0; k < 5; ++k) s.offer({&iv, {}, "r", "h"});
    s.finish("run finished", "r");
    for (std::uint64_t k = 0; k < 5; ++k) {
        const auto m = pop_json(s);
        CHECK(m["type"] == "frame");
        CHECK(m["seq"] == k);
    }
    const auto end = pop_json(s);
    CHECK(end["type"] == "end");
    CHECK(end["seq"] == 5);
    CHECK(end["reason"] == "run finished");
    CHECK(end["run_id"] == "r");
    CHECK_FALSE(s.pop());
}

TEST_CASE("stalled subscriber drops, then resumes with a drop notice") {
    const auto iv = interval_of(2);
    Subscriber s(kAllSignals, 4);
    for (int k = 0; k < 10; ++k) s.offer({&iv, {}, "r", "h"});
    CHECK(s.dropped_total() == 6);
    std::uint64_t expected_seq = 0;
    for (int k = 0; k < 4; ++k) CHECK(pop_json(s)["seq"] == expected_seq++);
    s.offer({&iv, {}, "r", "h"});
    const auto notice = pop_json(s);
    CHECK(notice["type"] == "drop");
    CHECK(notice["dropped"] == 6);
    CHECK(notice["seq"] == expected_seq++);
    const auto resumed = pop_json(s);
    CHECK(resumed["type"] == "frame");
    CHECK(resumed["seq"] == expected_seq++);
}

TEST_CASE("drops pending at the end are reported before the end notice") {
    const auto iv = interval_of(2);
    Subscriber s(kAllSignals, 2);
    for (int k = 0; k < 5; ++k) s.offer({&iv, {}, "r", "h"});
    s.finish("stopped");
    CHECK(pop_json(s)["seq"] == 0);
    CHECK(pop_json(s)["seq"] == 1);
    const auto notice = pop_json(s);
    CHECK(notice["type"] == "drop");
    CHECK(notice["dropped"] == 3);
    const auto end = pop_json(s);
    CHECK(end["type"] == "end");
    CHECK_FALSE(end.contains("run_id"));
    CHECK_FALSE(s.pop());
}

TEST_CASE("offers after finish are ignored") {
    const auto iv = interval_of(2);
    Subscriber s(kAllSignals, 4);
    s.finish("idle");
    s.offer({&iv, {}, "r", "h"});
    CHECK(pop_json(s)["type"] == "end");
    CHECK_FALSE(s.pop());
}

TEST_CASE("cancel wakes a blocked consumer") {
    Subscriber s(kAllSignals, 4);
    std::optional<std::string> got = "unset";
    std::thread consumer([&] { got = s.pop(); });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    s.cancel();
    consumer.join();
    CHECK_FALSE(got);
}

TEST_CASE("concurrent producer and consumer keep seq gapless") {
    const auto iv = interval_of(2);
    Subscriber s(kAllSignals, 16);
    std::thread producer([&] {
        for (int k = 0; k < 5000; ++k) s.offer({&iv, {}, "r", "h"});
        s.finish("done");
    });
    std::uint64_t expected = 0;
    std::uint64_t frames = 0;
    std::uint64_t dropped = 0;
    while (auto msg = s.pop()) {
        const auto m = json::parse(*msg);
        CHECK(m["seq"] == expected++);
        if (m["type"] == "frame") ++frames;
        if (m["type"] == "drop") dropped += m["dropped"].get<std::uint64_t>();
    }
    producer.join();
    CHECK(frames + dropped == 5000);
    CHECK(dropped == s.dropped_total());
}
