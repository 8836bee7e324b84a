#pragma once

// Biot-Savart field of the discretized conductors at the sensor heads.
//
// Every conductor/head pair reduces to a geometry-only coefficient vector c
// (units 1/m) such that the flux density is (mu0 I / 4pi) * c.

#include "linesense/common.hpp"
#include "linesense/geometry.hpp"

#include <array>
#include <vector>

namespace linesense::field {

struct CoefficientVector {
    double cx = 0.0;
    double cz = 0.0;
};

// One instant of the four measured components, tesla.
struct FieldSample {
    double t = 0.0;
    double bx1 = 0.0;
    double bz1 = 0.0;
    double bx2 = 0.0;
    double bz2 = 0.0;

    std::array<double, 4> components() const { return {bx1, bz1, bx2, bz2}; }
    static FieldSample from_components(double t, const std::array<double, 4>& b) {
        return {t, b[0], b[1], b[2], b[3]};
    }
};

// Four phase currents at one instant, amperes.
struct PhaseCurrents {
    double t = 0.0;
    double i_a = 0.0;
    double i_b = 0.0;
    double i_c = 0.0;
    double i_n = 0.0;

    std::array<double, 4> values() const { return {i_a, i_b, i_c, i_n}; }
    double operator[](Phase p) const { return values()[index_of(p)]; }
    static PhaseCurrents from_values(double t, const std::array<double, 4>& i) {
        return {t, i[0], i[1], i[2], i[3]};
    }
};

// Sum over segments of (dl x r) / |r|^3 at segment midpoints, r from the
// midpoint to the sensor. Throws SingularityError when the sensor lies within
// half the longest segment length of any segment.
CoefficientVector field_coefficient(const std::vector<Point3>& polyline, Point3 sensor);

// mu0 I / (2 pi d).
double analytic_infinite_wire(double current, double distance);

// Conductor polylines and per-head coefficients for one validated layout,
// computed once at construction and read-only afterwards.
class FieldModel {
public:
    explicit FieldModel(geometry::ValidatedLayout layout);

    const geometry::ValidatedLayout& layout() const noexcept { return layout_; }
    std::size_t head_count() const noexcept { return coefficients_.size(); }

    const std::vector<Point3>& polyline(Phase p) const { return polylines_[index_of(p)]; }
    const CoefficientVector& coefficient(std::size_t head, Phase p) const {
        return coefficients_.at(head)[index_of(p)];
    }

    // Field components (bx, bz per head, head order) for the given currents.
    std::vector<double> forward_components(const PhaseCurrents& currents) const;

private:
    geometry::ValidatedLayout layout_;
    std::array<std::vector<Point3>, 4> polylines_;
    std::vector<std::array<CoefficientVector, 4>> coefficients_;
};

// Two-head forward model: each component = (mu0/4pi) * sum_j c_j * I_j.
FieldSample forward_field(const FieldModel& model, const PhaseCurrents& currents);

}  // namespace linesense::field
