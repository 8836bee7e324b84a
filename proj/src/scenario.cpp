#include "linesense/scenario.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace linesense {

namespace {

void absorb(std::vector<std::string>& problems, std::string_view prefix, const ValidationError& e) {
    for (const auto& p : e.problems()) problems.push_back(fmt::format("{}: {}", prefix, p));
}

}  // namespace

std::array<sensor::GmrSpec, 4> effective_specs(const Scenario& scenario) {
    auto specs = scenario.sensors.gmr;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        specs[k].misalignment = scenario.errors.misalignment[k / 2];
        specs[k].noise_rms = scenario.errors.noise_rms;
        specs[k].offset = scenario.errors.offset;
    }
    return specs;
}

void validate_scenario(const Scenario& s) {
    std::vector<std::string> problems;
    if (s.name.empty()) problems.emplace_back("name must not be empty");

    try {
        (void)geometry::validate_layout(s.layout);
    } catch (const ValidationError& e) {
        absorb(problems, "layout", e);
    }
    if (s.layout.heads.size() != 2)
        problems.push_back(fmt::format("layout: streaming needs exactly 2 sensor heads, got {}", s.layout.heads.size()));

    try {
        waveform::validate(s.load, s.grid);
    } catch (const ValidationError& e) {
        absorb(problems, "load", e);
    }

    for (std::size_t k = 0; k < s.sensors.gmr.size(); ++k) {
        const auto& g = s.sensors.gmr[k];
        if (!(g.sensitivity > 0.0) || !std::isfinite(g.sensitivity))
            problems.push_back(fmt::format("sensors: OT{} sensitivity must be > 0", k + 1));
        if (!(g.operating_voltage > 0.0) || !std::isfinite(g.operating_voltage))
            problems.push_back(fmt::format("sensors: OT{} operating voltage must be > 0", k + 1));
    }
    if (!(s.sensors.hall.sensitivity > 0.0) || !std::isfinite(s.sensors.hall.sensitivity))
        problems.emplace_back("sensors: Hall sensitivity must be > 0");

    for (double m : s.errors.misalignment)
        if (!std::isfinite(m)) problems.emplace_back("errors: misalignment must be finite");
    if (!(s.errors.noise_rms >= 0.0) || !std::isfinite(s.errors.noise_rms))
        problems.emplace_back("errors: noise_rms must be finite and >= 0");
    if (!std::isfinite(s.errors.offset)) problems.emplace_back("errors: offset must be finite");
    if (!(s.cond_limit >= 1.0)) problems.push_back(fmt::format("cond_limit must be >= 1, got {}", s.cond_limit));

    if (!problems.empty()) throw ValidationError(std::move(problems));
}

Scenario default_scenario() { return Scenario{}; }

ErrorInjection default_error_injection() {
    return ErrorInjection{{deg_to_rad(2.0), deg_to_rad(2.0)}, 0.5e-6, 0.0};
}

}  // namespace linesense
