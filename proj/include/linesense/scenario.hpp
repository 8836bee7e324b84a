#pragma once

#include "linesense/coupling.hpp"
#include "linesense/geometry.hpp"
#include "linesense/sensor.hpp"
#include "linesense/waveform.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace linesense {

// Error sources applied on the GMR path during simulation.
struct ErrorInjection {
    std::array<double, 2> misalignment{0.0, 0.0};  // rad, per head
    double noise_rms = 0.0;                        // T, per channel
    double offset = 0.0;                           // T, per channel

    friend bool operator==(const ErrorInjection&, const ErrorInjection&) = default;
};

// Four GMR channels in OT1..OT4 order (bx1, bz1, bx2, bz2) plus the Hall
// reference shared by all phases.
struct SensorSuite {
    std::array<sensor::GmrSpec, 4> gmr{};
    sensor::HallSpec hall{};
};

// Everything one simulation or replay needs.
struct Scenario {
    std::string name = "default-linear";
    std::uint64_t seed = 1;
    geometry::FacilityLayout layout = geometry::default_layout();
    waveform::LoadScenario load = waveform::preset("linear-unbalanced");
    waveform::SampleGrid grid{28000.0, 2800, 0.0};
    SensorSuite sensors{};
    ErrorInjection errors{};
    double cond_limit = coupling::kDefaultConditionLimit;
};

// GMR specs with this scenario's error injection folded in (misalignment of
// each head on both of its channels, noise and offset on all four).
std::array<sensor::GmrSpec, 4> effective_specs(const Scenario& scenario);

// Throws ValidationError with every problem found across all sections.
// Streaming requires exactly two heads.
void validate_scenario(const Scenario& scenario);

Scenario default_scenario();

// 2 degrees on both heads plus 0.5 uT RMS channel noise.
ErrorInjection default_error_injection();

}  // namespace linesense
