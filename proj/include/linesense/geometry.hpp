#pragma once

// Overhead-line facility description: conductor spans with catenary sag,
// sensor-head positions, and polyline discretization of each conductor.
//
// Frame: x horizontal across the conductors, y along the conductor run
// (direction of positive current), z vertical up.

#include "linesense/common.hpp"

#include <limits>
#include <string>
#include <vector>

namespace linesense::geometry {

struct ConductorSpan {
    Phase phase = Phase::A;
    double x_offset = 0.0;       // m, horizontal position
    double end_height = 0.0;     // m, attachment height at every pole
    double sag = 0.0;            // m, mid-span drop
    double span_length = 3.0;    // m, pole spacing
    double total_length = 6.0;   // m, integer number of spans
};

struct SensorHead {
    std::string id;  // "Head1", "Head2", ...
    Point3 position;
};

struct FacilityLayout {
    std::vector<ConductorSpan> conductors;  // A, B, C, N
    std::vector<SensorHead> heads;          // exactly 2 for the streaming path
    double step = 0.01;                     // m, discretization step
};

// Sentinel catenary scale for a straight (zero-sag) conductor.
inline constexpr double kStraight = std::numeric_limits<double>::infinity();

// Catenary scale a with a*(cosh(span/(2a)) - 1) == sag, by bisection seeded
// from the parabolic estimate span^2/(8 sag). Returns kStraight for sag == 0.
double catenary_parameter(double sag, double span_length);

// Conductor height at position y along the run.
double conductor_height(const ConductorSpan& span, double y);

// Polyline along +y; samples are equally spaced in arc length (spacing <= step),
// with every pole and every mid-span point included exactly.
std::vector<Point3> sample_conductor(const ConductorSpan& span, double step);

double polyline_length(const std::vector<Point3>& polyline);

// Layout that passed validate_layout(). Only validate_layout can make one.
class ValidatedLayout {
public:
    const FacilityLayout& layout() const noexcept { return layout_; }
    const ConductorSpan& conductor(Phase p) const;
    std::size_t head_count() const noexcept { return layout_.heads.size(); }

private:
    friend ValidatedLayout validate_layout(FacilityLayout layout);
    explicit ValidatedLayout(FacilityLayout layout) : layout_(std::move(layout)) {}

    FacilityLayout layout_;
};

// Reports every invariant violation at once via ValidationError.
// Conductors are reordered to A, B, C, N.
ValidatedLayout validate_layout(FacilityLayout layout);

// Placeholder geometry (not measured facility values): conductors at
// x = -0.45, -0.15, 0.15, 0.45 m, 2.5 m poles, sags 0.08/0.08/0.08/0.06 m;
// heads at (0, 3.0, 1.6) and (0, 3.0, 1.2) m.
FacilityLayout default_layout();

// Same conductors, heads split across the cross-arm just below the lines at
// (-0.29, 3.0, 2.39) and (0.29, 3.0, 2.39) m. Well conditioned (cond ~ 2).
FacilityLayout near_field_layout();

}  // namespace linesense::geometry
