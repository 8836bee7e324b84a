#include "linesense/waveform.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace linesense::waveform {

namespace {

void validate_phase(const PhaseLoad& load, std::string_view name, std::vector<std::string>& problems) {
    if (!std::isfinite(load.amplitude) || load.amplitude < 0.0)
        problems.push_back(fmt::format("phase {}: amplitude must be finite and >= 0", name));
    if (!std::isfinite(load.phase_angle)) problems.push_back(fmt::format("phase {}: non-finite phase angle", name));
    std::set<int> orders;
    for (const auto& h : load.harmonics) {
        if (h.order < 2) problems.push_back(fmt::format("phase {}: harmonic order {} must be >= 2", name, h.order));
        if (!orders.insert(h.order).second)
            problems.push_back(fmt::format("phase {}: duplicate harmonic order {}", name, h.order));
        if (!(h.relative_amplitude >= 0.0 && h.relative_amplitude <= 1.0))
            problems.push_back(fmt::format("phase {}: harmonic {} relative amplitude {} outside [0, 1]", name,
                                           h.order, h.relative_amplitude));
        if (!std::isfinite(h.phase)) problems.push_back(fmt::format("phase {}: non-finite harmonic phase", name));
    }
}

double phase_current(const PhaseLoad& load, double omega_t) {
    const double theta = omega_t + load.phase_angle;
    double i = std::sin(theta);
    for (const auto& h : load.harmonics) i += h.relative_amplitude * std::sin(h.order * theta + h.phase);
    return load.amplitude * i;
}

bool is_whole_cycles(double cycles) {
    const double rounded = std::round(cycles);
    return rounded >= 1.0 && std::abs(cycles - rounded) <= 1e-9 * std::max(1.0, cycles);
}

}  // namespace

double highest_frequency(const LoadScenario& scenario) {
    int order = 1;
    auto scan = [&](const PhaseLoad& load) {
        for (const auto& h : load.harmonics) order = std::max(order, h.order);
    };
    for (const auto& p : scenario.phases) scan(p);
    if (scenario.neutral_mode == NeutralMode::Explicit) scan(scenario.neutral);
    return scenario.fundamental_hz * order;
}

void validate(const LoadScenario& scenario, const std::optional<SampleGrid>& grid) {
    std::vector<std::string> problems;
    if (!(scenario.fundamental_hz > 0.0) || !std::isfinite(scenario.fundamental_hz))
        problems.push_back(fmt::format("fundamental_hz must be > 0, got {}", scenario.fundamental_hz));
    for (std::size_t p = 0; p < 3; ++p) validate_phase(scenario.phases[p], phase_name(kPhases[p]), problems);
    if (scenario.neutral_mode == NeutralMode::Explicit) validate_phase(scenario.neutral, "N", problems);

    if (grid) {
        if (!(grid->rate_hz > 0.0) || !std::isfinite(grid->rate_hz))
            problems.push_back(fmt::format("rate_hz must be > 0, got {}", grid->rate_hz));
        else if (problems.empty() && !(grid->rate_hz > 2.0 * highest_frequency(scenario)))
            problems.push_back(fmt::format("rate_hz {} aliases the highest synthesized frequency {} Hz (need > {})",
                                           grid->rate_hz, highest_frequency(scenario),
                                           2.0 * highest_frequency(scenario)));
        if (!std::isfinite(grid->t0)) problems.push_back("t0 must be finite");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

field::PhaseCurrents evaluate(const LoadScenario& scenario, double t) {
    const double omega_t = 2.0 * std::numbers::pi * scenario.fundamental_hz * t;
    field::PhaseCurrents out;
    out.t = t;
    out.i_a = phase_current(scenario.phases[0], omega_t);
    out.i_b = phase_current(scenario.phases[1], omega_t);
    out.i_c = phase_current(scenario.phases[2], omega_t);
    out.i_n = scenario.neutral_mode == NeutralMode::Kcl ? -(out.i_a + out.i_b + out.i_c)
                                                        : phase_current(scenario.neutral, omega_t);
    return out;
}

CurrentSeries synthesize(const LoadScenario& scenario, const SampleGrid& grid) {
    validate(scenario, grid);
    CurrentSeries series;
    series.t.resize(grid.n_samples);
    for (auto& p : series.phase) p.resize(grid.n_samples);
    for (std::size_t k = 0; k < grid.n_samples; ++k) {
        const auto i = evaluate(scenario, grid.time(k));
        series.t[k] = i.t;
        const auto v = i.values();
        for (std::size_t p = 0; p < 4; ++p) series.phase[p][k] = v[p];
    }
    return series;
}

double rms(std::span<const double> samples) {
    if (samples.empty()) throw ValidationError("rms of an empty waveform");
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

std::size_t whole_cycle_samples(std::size_t n, double fundamental_hz, double rate_hz) {
    for (std::size_t m = n; m >= 1; --m)
        if (is_whole_cycles(static_cast<double>(m) * fundamental_hz / rate_hz)) return m;
    return n;
}

std::vector<double> harmonic_magnitudes(std::span<const double> samples, double fundamental_hz, double rate_hz,
                                        int max_order) {
    if (samples.empty()) throw ValidationError("harmonic analysis of an empty waveform");
    if (max_order < 1) throw ValidationError("max_order must be >= 1");
    const double n = static_cast<double>(samples.size());
    const double cycles = n * fundamental_hz / rate_hz;
    if (!is_whole_cycles(cycles))
        throw ValidationError(fmt::format("window holds {} cycles; need an integer number to avoid leakage", cycles));
    if (!(max_order * fundamental_hz < rate_hz / 2.0))
        throw ValidationError(fmt::format("order {} exceeds the Nyquist limit of the {} Hz grid", max_order, rate_hz));

    std::vector<double> mags(static_cast<std::size_t>(max_order));
    for (int h = 1; h <= max_order; ++h) {
        const double w = 2.0 * std::numbers::pi * h * fundamental_hz / rate_hz;
        double s = 0.0;
        double c = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double arg = w * static_cast<double>(k);
            s += samples[k] * std::sin(arg);
            c += samples[k] * std::cos(arg);
        }
        mags[static_cast<std::size_t>(h - 1)] = 2.0 / n * std::hypot(s, c);
    }
    return mags;
}

std::vector<std::string> preset_names() {
    return {"linear-balanced", "linear-unbalanced", "cfl-like", "microwave-like", "vacuum-like"};
}

LoadScenario preset(const std::string& name) {
    auto three_phase = [](std::string label, std::array<double, 3> amps, std::vector<Harmonic> harmonics) {
        LoadScenario s;
        s.label = std::move(label);
        for (std::size_t p = 0; p < 3; ++p) s.phases[p] = {amps[p], kBalancedAngles[p], harmonics};
        return s;
    };
    if (name == "linear-balanced") return three_phase("Linear", {10.0, 10.0, 10.0}, {});
    // Unbalanced resistive mix, roughly 8.6 / 4.4 / 4.5 A RMS.
    if (name == "linear-unbalanced") return three_phase("Linear", {12.2, 6.2, 6.3}, {});
    if (name == "cfl-like")
        return three_phase("Non-linear", {8.0, 8.0, 8.0}, {{3, 0.30, 0.0}, {5, 0.15, 0.0}, {7, 0.08, 0.0}});
    if (name == "microwave-like")
        return three_phase("Non-linear", {6.7, 7.2, 8.4}, {{3, 0.25, 0.3}, {5, 0.10, -0.2}, {7, 0.04, 0.0}});
    if (name == "vacuum-like")
        return three_phase("Non-linear", {7.0, 7.0, 7.0}, {{3, 0.15, 0.0}, {5, 0.05, 0.0}});
    throw ValidationError(fmt::format("unknown load preset '{}'", name));
}

}  // namespace linesense::waveform
