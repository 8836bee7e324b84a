#include "linesense/metrics.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace linesense::metrics {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError(fmt::format("waveform length mismatch: {} vs {}", a.size(), b.size()));
}

std::string cell(const std::optional<double>& v, int precision) {
    return v ? fmt::format("{:.{}f}", *v, precision) : std::string("-");
}

}  // namespace

double nmae(std::span<const double> calculated, std::span<const double> measured) {
    require_same_length(calculated, measured);
    if (measured.empty()) throw ValidationError("NMAE of empty waveforms");
    double err = 0.0;
    double mag = 0.0;
    for (std::size_t k = 0; k < measured.size(); ++k) {
        err += std::abs(calculated[k] - measured[k]);
        mag += std::abs(measured[k]);
    }
    if (!(mag > 0.0)) throw ValidationError("NMAE undefined: measured waveform has zero mean magnitude");
    return 100.0 * err / mag;
}

std::vector<double> residual(std::span<const double> calculated, std::span<const double> measured) {
    require_same_length(calculated, measured);
    std::vector<double> out(calculated.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = calculated[k] - measured[k];
    return out;
}

double max_abs(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

ComparisonRow make_row(std::string load_label, Phase phase, std::optional<double> measured_rms, double calculated_rms,
                       std::optional<double> nmae_percent) {
    ComparisonRow row;
    row.load_label = std::move(load_label);
    row.phase = phase;
    row.measured_rms = measured_rms;
    row.calculated_rms = calculated_rms;
    row.nmae_percent = nmae_percent;
    if (nmae_percent) row.relative_accuracy_percent = 100.0 - *nmae_percent;
    return row;
}

std::string format_table(const ComparisonTable& table) {
    std::string out = fmt::format("{:<12} {:<5} {:>12} {:>14} {:>9} {:>13} {:>13}\n", "Load type", "Phase",
                                  "Measured (A)", "Calculated (A)", "NMAE (%)", "Rel. acc. (%)", "Max |res| (A)");
    for (const auto& r : table.rows) {
        out += fmt::format("{:<12} {:<5} {:>12} {:>14} {:>9} {:>13} {:>13}\n", r.load_label, phase_name(r.phase),
                           cell(r.measured_rms, 3), fmt::format("{:.3f}", r.calculated_rms), cell(r.nmae_percent, 2),
                           cell(r.relative_accuracy_percent, 2), cell(r.max_abs_residual, 3));
    }
    if (!table.note.empty()) out += "note: " + table.note + "\n";
    return out;
}

void NmaeAccumulator::add(const std::array<double, 4>& calculated, const std::array<double, 4>& measured) {
    for (std::size_t p = 0; p < 4; ++p) {
        const double r = std::abs(calculated[p] - measured[p]);
        abs_error_[p] += r;
        abs_measured_[p] += std::abs(measured[p]);
        max_residual_[p] = std::max(max_residual_[p], r);
    }
    ++count_;
}

std::optional<double> NmaeAccumulator::nmae(Phase p) const {
    const auto i = index_of(p);
    if (!(abs_measured_[i] > 0.0)) return std::nullopt;
    return 100.0 * abs_error_[i] / abs_measured_[i];
}

}  // namespace linesense::metrics
