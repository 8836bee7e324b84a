#include "linesense/fieldmodel.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace linesense::field {

namespace {

double point_segment_distance(Point3 p, Point3 a, Point3 b) {
    const Point3 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

}  // namespace

CoefficientVector field_coefficient(const std::vector<Point3>& polyline, Point3 sensor) {
    if (polyline.size() < 2) throw ValidationError("polyline needs at least 2 points");

    double longest = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) longest = std::max(longest, norm(polyline[i] - polyline[i - 1]));
    const double keep_out = 0.5 * longest;

    Point3 sum{};
    for (std::size_t i = 1; i < polyline.size(); ++i) {
        const Point3 a = polyline[i - 1];
        const Point3 b = polyline[i];
        if (point_segment_distance(sensor, a, b) <= keep_out)
            throw SingularityError(fmt::format("sensor at ({}, {}, {}) is within {} m of a conductor segment",
                                               sensor.x, sensor.y, sensor.z, keep_out));
        const Point3 dl = b - a;
        const Point3 r = sensor - 0.5 * (a + b);
        const double r2 = dot(r, r);
        const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
        sum = sum + inv_r3 * cross(dl, r);
    }
    return {sum.x, sum.z};
}

double analytic_infinite_wire(double current, double distance) {
    if (!(distance > 0.0)) throw ValidationError(fmt::format("distance must be > 0, got {}", distance));
    return kMu0 * current / (2.0 * std::numbers::pi * distance);
}

FieldModel::FieldModel(geometry::ValidatedLayout layout) : layout_(std::move(layout)) {
    const auto& l = layout_.layout();
    for (Phase p : kPhases) polylines_[index_of(p)] = geometry::sample_conductor(layout_.conductor(p), l.step);
    coefficients_.resize(l.heads.size());
    for (std::size_t h = 0; h < l.heads.size(); ++h)
        for (Phase p : kPhases)
            coefficients_[h][index_of(p)] = field_coefficient(polylines_[index_of(p)], l.heads[h].position);
}

std::vector<double> FieldModel::forward_components(const PhaseCurrents& currents) const {
    const auto i = currents.values();
    std::vector<double> out(2 * coefficients_.size(), 0.0);
    for (std::size_t h = 0; h < coefficients_.size(); ++h) {
        double bx = 0.0;
        double bz = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            bx += coefficients_[h][j].cx * i[j];
            bz += coefficients_[h][j].cz * i[j];
        }
        out[2 * h] = kMu0Over4Pi * bx;
        out[2 * h + 1] = kMu0Over4Pi * bz;
    }
    return out;
}

FieldSample forward_field(const FieldModel& model, const PhaseCurrents& currents) {
    if (model.head_count() != 2)
        throw ValidationError(fmt::format("forward_field needs exactly 2 heads, layout has {}", model.head_count()));
    const auto i = currents.values();
    std::array<double, 4> b{};
    for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t j = 0; j < 4; ++j) {
            const auto& c = model.coefficient(h, kPhases[j]);
            b[2 * h] += c.cx * i[j];
            b[2 * h + 1] += c.cz * i[j];
        }
    }
    for (double& v : b) v *= kMu0Over4Pi;
    return FieldSample::from_components(currents.t, b);
}

}  // namespace linesense::field
