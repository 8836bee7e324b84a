// Acceptance run: one PASS/FAIL line per primary criterion, exit 1 if any fails.

#include "linesense/dataio.hpp"
#include "linesense/errors.hpp"
#include "linesense/metrics.hpp"
#include "linesense/pipeline.hpp"
#include "linesense/sensor.hpp"
#include "linesense/waveform.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>

#include <unistd.h>

using namespace linesense;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(LINESENSE_SOURCE_DIR) / "scenarios";

struct Outcome {
    bool pass = false;
    std::string detail;
};

double deg(double d) { return d * std::numbers::pi / 180.0; }

std::array<double, 4> phase_nmae(const pipeline::RunRecord& run) {
    std::array<double, 4> out{};
    for (const auto& row : run.table.rows) out[index_of(row.phase)] = row.nmae_percent.value_or(NAN);
    return out;
}

std::array<double, 4> phase_max_residual(const pipeline::RunRecord& run) {
    std::array<double, 4> out{};
    for (const auto& row : run.table.rows) out[index_of(row.phase)] = row.max_abs_residual.value_or(NAN);
    return out;
}

Outcome round_trip() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> amp(1.0, 15.0);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    std::uniform_real_distribution<double> rel(0.0, 0.3);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    double worst_nmae = 0.0;
    double worst_residual = 0.0;
    int scenarios = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        Scenario s = default_scenario();
        s.seed = seed;
        s.name = fmt::format("random-{}", seed);
        s.grid.n_samples = 560;
        for (auto& h : s.layout.heads) {
            h.position.x += jitter(rng);
            h.position.z += jitter(rng);
        }
        for (std::size_t p = 0; p < 3; ++p) {
            auto& ph = s.load.phases[p];
            ph.amplitude = amp(rng);
            ph.phase_angle = waveform::kBalancedAngles[p] + deg(10.0) * jitter(rng) / 0.05;
            ph.harmonics = {{3, rel(rng), angle(rng)}, {5, rel(rng), angle(rng)}, {7, rel(rng), angle(rng)}};
        }
        const auto run = pipeline::run_simulation(s);
        ++scenarios;
        for (double v : phase_nmae(run)) worst_nmae = std::max(worst_nmae, v);
        for (double v : phase_max_residual(run)) worst_residual = std::max(worst_residual, v);
    }
    return {scenarios >= 50 && worst_nmae < 0.01 && worst_residual < 1e-6,
            fmt::format("{} scenarios, worst NMAE {:.3g}%, worst |residual| {:.3g} A", scenarios, worst_nmae,
                        worst_residual)};
}

Outcome infinite_wire() {
    geometry::ConductorSpan span{.phase = Phase::A, .x_offset = 0.0, .end_height = 5.0, .sag = 0.0,
                                 .span_length = 100.0, .total_length = 200.0};
    const auto wire = geometry::sample_conductor(span, 0.01);
    const double current = 10.0;
    double worst = 0.0;
    for (double d : {0.5, 1.0, 1.5, 2.0}) {
        const auto c = field::field_coefficient(wire, {0.0, 100.0, 5.0 - d});
        const double b = kMu0Over4Pi * current * std::hypot(c.cx, c.cz);
        const double expected = field::analytic_infinite_wire(current, d);
        worst = std::max(worst, std::abs(b - expected) / expected);
    }
    return {worst < 0.01, fmt::format("worst relative deviation {:.3g}% over d = 0.5..2 m", 100.0 * worst)};
}

Outcome table_arithmetic() {
    struct Row {
        const char* load;
        Phase phase;
        double meas, calc, nmae;
        const char* accuracy;
    };
    const Row rows[] = {
        {"Linear", Phase::A, 8.649, 8.832, 9.46, "90.54"},      {"Linear", Phase::B, 4.403, 3.597, 18.36, "81.64"},
        {"Linear", Phase::C, 4.436, 3.856, 14.36, "85.64"},     {"Linear", Phase::N, 4.046, 4.120, 12.47, "87.53"},
        {"Non-linear", Phase::A, 4.751, 5.166, 19.47, "80.53"}, {"Non-linear", Phase::B, 5.089, 4.263, 17.02, "82.98"},
        {"Non-linear", Phase::C, 5.935, 5.515, 8.51, "91.49"},  {"Non-linear", Phase::N, 3.047, 2.587, 35.36, "64.64"},
    };
    bool ok = true;
    for (const auto& r : rows) {
        metrics::ComparisonTable t;
        t.rows.push_back(metrics::make_row(r.load, r.phase, r.meas, r.calc, r.nmae));
        const auto text = metrics::format_table(t);
        const auto line = text.substr(text.find('\n') + 1);
        for (const auto& cell : {fmt::format("{:.3f}", r.meas), fmt::format("{:.3f}", r.calc),
                                 fmt::format("{:.2f}", r.nmae), std::string(r.accuracy)})
            ok = ok && line.find(cell) != std::string::npos;
        ok = ok && std::abs(*t.rows[0].relative_accuracy_percent + r.nmae - 100.0) < 1e-12;
    }
    return {ok, "8 reference rows render; 9.46% -> 90.54%, 35.36% -> 64.64%"};
}

Outcome error_injection_band() {
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    bool any = false;
    std::string detail;
    for (const char* name : {"near-field-linear", "near-field-nonlinear", "near-field-vacuum"}) {
        const auto base = dataio::load_scenario_file(kScenarios / (std::string(name) + ".json"));
        double lo = 1e9;
        double hi = 0.0;
        double worst_residual = 0.0;
        double max_rms = 0.0;
        for (auto seed : seeds) {
            auto s = base;
            s.seed = seed;
            const auto run = pipeline::run_simulation(s);
            for (double v : phase_nmae(run)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            for (double v : phase_max_residual(run)) worst_residual = std::max(worst_residual, v);
            for (const auto& row : run.table.rows) max_rms = std::max(max_rms, row.measured_rms.value_or(0.0));
        }
        const bool ok = base.errors == default_error_injection() && max_rms <= 10.0 && lo >= 8.0 && hi <= 36.0 &&
                        worst_residual <= 2.5;
        any = any || ok;
        detail += fmt::format("{}{}: NMAE {:.2f}..{:.2f}%, max |res| {:.2f} A ({})", detail.empty() ? "" : "; ", name,
                              lo, hi, worst_residual, ok ? "in band" : "out of band");
    }
    return {any, detail};
}

Outcome misalignment_monotone() {
    std::array<double, 4> previous{};
    previous.fill(-1.0);
    bool ok = true;
    std::string detail;
    for (double d : {0.0, 2.0, 5.0, 10.0}) {
        auto s = default_scenario();
        s.grid.n_samples = 560;
        s.errors.misalignment = {deg(d), deg(d)};
        const auto n = phase_nmae(pipeline::run_simulation(s));
        for (std::size_t p = 0; p < 4; ++p) {
            ok = ok && n[p] >= previous[p];
            previous[p] = n[p];
        }
        detail += fmt::format("{}{:g}deg: max {:.3g}%", detail.empty() ? "" : ", ", d, *std::max_element(n.begin(), n.end()));
    }
    return {ok, detail};
}

Outcome throughput() {
    const auto s = default_scenario();
    const auto cycle = pipeline::benchmark(s, {{28000.0, 560, 0.0}}, 20).front();
    const auto rows = pipeline::benchmark(s, {{28000.0, 10000, 0.0}, {28000.0, 100000, 0.0}}, 5);
    const double ratio = rows[1].compute_seconds / rows[0].compute_seconds;
    return {cycle.compute_seconds <= 0.0034 && ratio <= 30.0,
            fmt::format("560 frames in {:.4f} ms; time(1e5)/time(1e4) = {:.2f}", cycle.compute_seconds * 1e3, ratio)};
}

Outcome calibration() {
    std::vector<double> errors;
    bool in_band = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const auto fit = sensor::fit_sensitivity(sensor::make_solenoid_sweep({.noise_v = 1e-3}, &rng), 8.0);
        in_band = in_band && fit.fitted_sensitivity >= 11.0 && fit.fitted_sensitivity <= 18.0;
        errors.push_back((fit.fitted_sensitivity - 15.0) / 15.0);
    }
    const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    const double rms = std::sqrt(std::inner_product(errors.begin(), errors.end(), errors.begin(), 0.0) /
                                 static_cast<double>(errors.size()));
    const auto within = std::count_if(errors.begin(), errors.end(), [](double e) { return std::abs(e) <= 0.01; });
    const auto sweep = sensor::make_solenoid_sweep({});
    const double exact = sensor::fit_sensitivity(sweep, 8.0).fitted_sensitivity;
    bool band_enforced = false;
    try {
        sensor::fit_sensitivity(sensor::make_solenoid_sweep({.slope_v_per_oe = 0.2}), 8.0);
    } catch (const ValidationError&) {
        band_enforced = true;
    }
    const bool ok = std::abs(exact - 15.0) < 1e-9 && std::abs(mean) < 0.01 && rms < 0.01 && within >= 90 && in_band &&
                    band_enforced;
    return {ok, fmt::format("noiseless {:.6f} mV/V-Oe; 1 mV noise over 100 seeds: mean error {:.3f}%, RMS {:.3f}%, "
                            "{} within 1%; band enforced: {}",
                            exact, 100.0 * mean, 100.0 * rms, within, band_enforced ? "yes" : "no")};
}

Outcome mfdf_units() {
    const double m = sensor::mfdf(8.0, 12.5);
    const sensor::GmrSpec spec;
    double worst = 0.0;
    for (double b : {-2e-4, -3.3e-6, 1e-9, 4.2e-5, 3e-4})
        worst = std::max(worst, std::abs(sensor::voltage_to_field(sensor::field_to_voltage(b, spec), spec) - b) / std::abs(b));
    return {std::abs(m - 1e-3) <= 1e-18 && worst <= 1e-12, fmt::format("MFDF {:.6g} T/V, round trip rel. error {:.2g}", m, worst)};
}

Outcome kcl_harmonics() {
    const waveform::SampleGrid grid{28000.0, 560, 0.0};
    const double balanced = waveform::rms(waveform::synthesize(waveform::preset("linear-balanced"), grid).phase[3]);
    auto load = waveform::preset("linear-balanced");
    for (auto& p : load.phases) p.harmonics = {{3, 0.2, 0.0}};
    const double triplen = waveform::rms(waveform::synthesize(load, grid).phase[3]);
    return {balanced < 1e-9 && triplen > 1.0,
            fmt::format("balanced neutral RMS {:.2g} A, with 3rd harmonic {:.3f} A", balanced, triplen)};
}

Outcome persistence() {
    const auto dir = std::filesystem::temp_directory_path() / fmt::format("linesense-acceptance-{}", ::getpid());
    auto s = dataio::load_scenario_file(kScenarios / "near-field-nonlinear.json");
    auto run = pipeline::run_simulation(s);
    run.id = "acceptance";
    dataio::write_run(run, dir);
    const auto back = dataio::read_run(dir);
    std::filesystem::remove_all(dir);
    const bool same_table = back.table == run.table;
    bool same_frames = back.frames.size() == run.frames.size();
    for (std::size_t k = 0; same_frames && k < run.frames.size(); ++k)
        same_frames = back.frames[k].calculated.values() == run.frames[k].calculated.values();
    return {same_table && same_frames, fmt::format("table equal: {}, {} frames equal: {}", same_table, run.frames.size(),
                                                   same_frames)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"round-trip exactness", round_trip},
        {"infinite-wire oracle", infinite_wire},
        {"comparison table arithmetic", table_arithmetic},
        {"error injection NMAE band and residual bound", error_injection_band},
        {"monotone misalignment sensitivity", misalignment_monotone},
        {"throughput", throughput},
        {"calibration", calibration},
        {"MFDF units", mfdf_units},
        {"KCL and harmonics", kcl_harmonics},
        {"persistence", persistence},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        if (!o.pass) ++failures;
        fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
    return failures == 0 ? 0 : 1;
}
