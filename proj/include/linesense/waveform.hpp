#pragma once

// Per-phase load-current synthesis on a uniform grid, plus RMS and
// single-bin harmonic analysis.

#include "linesense/common.hpp"
#include "linesense/fieldmodel.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace linesense::waveform {

struct Harmonic {
    int order = 3;
    double relative_amplitude = 0.0;  // fraction of the fundamental
    double phase = 0.0;               // rad, relative to the phase's own fundamental
};

struct PhaseLoad {
    double amplitude = 0.0;  // A, peak
    double phase_angle = 0.0;  // rad
    std::vector<Harmonic> harmonics;
};

enum class NeutralMode { Kcl, Explicit };

struct LoadScenario {
    std::string label = "Linear";
    double fundamental_hz = 50.0;
    std::array<PhaseLoad, 3> phases;       // A, B, C
    NeutralMode neutral_mode = NeutralMode::Kcl;
    PhaseLoad neutral;                     // used in Explicit mode only
};

struct SampleGrid {
    double rate_hz = 28000.0;
    std::size_t n_samples = 560;
    double t0 = 0.0;

    double time(std::size_t k) const { return t0 + static_cast<double>(k) / rate_hz; }
};

// 4 x Ns matrix of phase currents (A, B, C, N) with shared timestamps.
struct CurrentSeries {
    std::vector<double> t;
    std::array<std::vector<double>, 4> phase;

    std::size_t size() const { return t.size(); }
    field::PhaseCurrents at(std::size_t k) const {
        return {t[k], phase[0][k], phase[1][k], phase[2][k], phase[3][k]};
    }
};

// Throws ValidationError listing every problem (amplitudes, harmonic orders,
// aliasing against the grid rate when grid is given).
void validate(const LoadScenario& scenario, const std::optional<SampleGrid>& grid = std::nullopt);

// Highest synthesized frequency, Hz.
double highest_frequency(const LoadScenario& scenario);

// i_p(t) = A_p sin(w t + phi_p) + sum_h A_p r_h sin(h (w t + phi_p) + phi_h).
// Neutral is -(A+B+C) in Kcl mode.
field::PhaseCurrents evaluate(const LoadScenario& scenario, double t);

CurrentSeries synthesize(const LoadScenario& scenario, const SampleGrid& grid);

double rms(std::span<const double> samples);

// Largest prefix length m <= n that holds a whole number of fundamental
// cycles (at least one), or n when none does.
std::size_t whole_cycle_samples(std::size_t n, double fundamental_hz, double rate_hz);

// Amplitude per order 1..max_order ([0] is the fundamental). The window must
// hold an integer number of cycles.
std::vector<double> harmonic_magnitudes(std::span<const double> samples, double fundamental_hz, double rate_hz,
                                        int max_order);

// Balanced phase angles 0, -120, +120 degrees.
inline constexpr std::array<double, 3> kBalancedAngles{0.0, -2.0 * std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};

// Named load presets. The nonlinear recipes are illustrative stand-ins, not
// measured appliance spectra.
std::vector<std::string> preset_names();
LoadScenario preset(const std::string& name);

}  // namespace linesense::waveform
