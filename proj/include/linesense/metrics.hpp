#pragma once

// Accuracy scoring of calculated against measured currents.

#include "linesense/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace linesense::metrics {

// 100 * mean|calc - meas| / mean|meas|, percent.
double nmae(std::span<const double> calculated, std::span<const double> measured);

std::vector<double> residual(std::span<const double> calculated, std::span<const double> measured);
double max_abs(std::span<const double> values);

struct ComparisonRow {
    std::string load_label;
    Phase phase = Phase::A;
    std::optional<double> measured_rms;  // A; absent without a reference channel
    double calculated_rms = 0.0;
    std::optional<double> nmae_percent;
    std::optional<double> relative_accuracy_percent;  // 100 - nmae
    std::optional<double> max_abs_residual;           // A

    friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
    std::string note;

    friend bool operator==(const ComparisonTable&, const ComparisonTable&) = default;
};

ComparisonRow make_row(std::string load_label, Phase phase, std::optional<double> measured_rms, double calculated_rms,
                       std::optional<double> nmae_percent);

// Aligned plain-text rendering, one row per phase.
std::string format_table(const ComparisonTable& table);

// Single-writer streaming NMAE: running sums of |calc - meas| and |meas|.
class NmaeAccumulator {
public:
    void add(const std::array<double, 4>& calculated, const std::array<double, 4>& measured);
    void reset() { *this = NmaeAccumulator{}; }

    std::size_t count() const noexcept { return count_; }
    // nullopt while mean |meas| is zero for that phase.
    std::optional<double> nmae(Phase p) const;
    double max_abs_residual(Phase p) const { return max_residual_[index_of(p)]; }

private:
    std::array<double, 4> abs_error_{};
    std::array<double, 4> abs_measured_{};
    std::array<double, 4> max_residual_{};
    std::size_t count_ = 0;
};

}  // namespace linesense::metrics
