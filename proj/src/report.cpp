#include "linesense/report.hpp"

#include "linesense/waveform.hpp"

#include <algorithm>

namespace linesense::metrics {

ComparisonTable build_table(const pipeline::RunRecord& run) {
    ComparisonTable table;
    const std::size_t n = run.frames.size();
    if (n == 0) {
        table.note = "no frames";
        return table;
    }

    const bool has_reference =
        std::all_of(run.frames.begin(), run.frames.end(), [](const auto& f) { return f.measured.has_value(); });
    const std::size_t window =
        waveform::whole_cycle_samples(n, run.scenario.load.fundamental_hz, run.scenario.grid.rate_hz);

    for (Phase p : kPhases) {
        std::vector<double> calc(n);
        std::vector<double> meas(has_reference ? n : 0);
        for (std::size_t k = 0; k < n; ++k) {
            calc[k] = run.frames[k].calculated[p];
            if (has_reference) meas[k] = (*run.frames[k].measured)[p];
        }
        const double calc_rms = waveform::rms(std::span(calc).first(window));
        if (!has_reference) {
            table.rows.push_back(make_row(run.scenario.load.label, p, std::nullopt, calc_rms, std::nullopt));
            continue;
        }
        const double meas_rms = waveform::rms(std::span(meas).first(window));
        std::optional<double> error;
        if (max_abs(meas) > 0.0) error = nmae(calc, meas);
        auto row = make_row(run.scenario.load.label, p, meas_rms, calc_rms, error);
        row.max_abs_residual = max_abs(residual(calc, meas));
        table.rows.push_back(std::move(row));
    }
    if (!has_reference) table.note = "no Hall reference channels: measured RMS and NMAE omitted";
    return table;
}

}  // namespace linesense::metrics
