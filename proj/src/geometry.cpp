#include "linesense/geometry.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace linesense::geometry {

namespace {

// Drop of a catenary with scale a at horizontal distance u from its vertex,
// a*(cosh(u/a) - 1), in a form that stays accurate for a >> u.
double catenary_rise(double a, double u) {
    if (std::isinf(a)) return 0.0;
    const double s = std::sinh(u / (2.0 * a));
    return 2.0 * a * s * s;
}

int span_count(const ConductorSpan& span) {
    return static_cast<int>(std::lround(span.total_length / span.span_length));
}

bool is_integer_multiple(double total, double span) {
    const double ratio = total / span;
    const double rounded = std::round(ratio);
    return rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio);
}

}  // namespace

double catenary_parameter(double sag, double span_length) {
    if (!std::isfinite(sag) || sag < 0.0) throw ValidationError(fmt::format("sag must be >= 0, got {}", sag));
    if (!std::isfinite(span_length) || span_length <= 0.0)
        throw ValidationError(fmt::format("span_length must be > 0, got {}", span_length));
    if (sag == 0.0) return kStraight;

    const double half = span_length / 2.0;
    auto drop = [&](double a) { return catenary_rise(a, half); };  // decreasing in a

    // The catenary lies above its osculating parabola, so the root sits at or
    // just above the parabolic estimate.
    double lo = span_length * span_length / (8.0 * sag);
    double hi = 2.0 * lo;
    int guard = 0;
    while (drop(lo) < sag) {
        lo /= 2.0;
        if (++guard > 200) throw NumericError("catenary_parameter: could not bracket root");
    }
    guard = 0;
    while (drop(hi) > sag) {
        hi *= 2.0;
        if (++guard > 200) throw NumericError("catenary_parameter: could not bracket root");
    }

    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi || (hi - lo) <= 1e-15 * hi) return mid;
        if (drop(mid) > sag)
            lo = mid;
        else
            hi = mid;
    }
    throw NumericError(fmt::format("catenary_parameter did not converge for sag={} span={}", sag, span_length));
}

double conductor_height(const ConductorSpan& span, double y) {
    const int spans = span_count(span);
    const double a = catenary_parameter(span.sag, span.span_length);
    int k = static_cast<int>(std::floor(y / span.span_length));
    k = std::clamp(k, 0, std::max(spans - 1, 0));
    const double u = y - (k + 0.5) * span.span_length;
    if (std::isinf(a)) return span.end_height;
    return span.end_height - span.sag + catenary_rise(a, u);
}

std::vector<Point3> sample_conductor(const ConductorSpan& span, double step) {
    if (!(step > 0.0) || !std::isfinite(step)) throw ValidationError(fmt::format("step must be > 0, got {}", step));
    if (!(span.span_length > 0.0)) throw ValidationError("span_length must be > 0");
    if (!is_integer_multiple(span.total_length, span.span_length))
        throw ValidationError("total_length must be a positive integer multiple of span_length");

    const double a = catenary_parameter(span.sag, span.span_length);
    const double half = span.span_length / 2.0;
    const double bottom = span.end_height - span.sag;

    // Arc length of one span, measured symmetric about the vertex.
    const double arc = std::isinf(a) ? span.span_length : 2.0 * a * std::sinh(half / a);
    const int segments = 2 * static_cast<int>(std::ceil(arc / (2.0 * step)));

    std::vector<double> u(segments + 1);
    std::vector<double> z(segments + 1);
    for (int i = 0; i <= segments; ++i) {
        if (i == 0) {
            u[i] = -half;
            z[i] = span.end_height;
        } else if (i == segments) {
            u[i] = half;
            z[i] = span.end_height;
        } else if (2 * i == segments) {
            u[i] = 0.0;
            z[i] = bottom;
        } else {
            const double s = -0.5 * arc + arc * i / segments;
            u[i] = std::isinf(a) ? s : a * std::asinh(s / a);
            z[i] = std::isinf(a) ? span.end_height : bottom + catenary_rise(a, u[i]);
        }
    }

    const int spans = span_count(span);
    std::vector<Point3> points;
    points.reserve(static_cast<std::size_t>(spans) * segments + 1);
    for (int k = 0; k < spans; ++k) {
        const double centre = (k + 0.5) * span.span_length;
        for (int i = (k == 0 ? 0 : 1); i <= segments; ++i) {
            // Poles land exactly on multiples of span_length.
            double y = centre + u[i];
            if (i == 0) y = k * span.span_length;
            if (i == segments) y = (k + 1) * span.span_length;
            if (2 * i == segments) y = centre;
            points.push_back({span.x_offset, y, z[i]});
        }
    }
    return points;
}

double polyline_length(const std::vector<Point3>& polyline) {
    double total = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) total += norm(polyline[i] - polyline[i - 1]);
    return total;
}

const ConductorSpan& ValidatedLayout::conductor(Phase p) const { return layout_.conductors.at(index_of(p)); }

ValidatedLayout validate_layout(FacilityLayout layout) {
    std::vector<std::string> problems;

    if (layout.conductors.size() != 4) {
        problems.push_back(fmt::format("expected 4 conductors (A, B, C, N), got {}", layout.conductors.size()));
    } else {
        std::array<int, 4> seen{};
        for (const auto& c : layout.conductors) ++seen[index_of(c.phase)];
        for (Phase p : kPhases) {
            if (seen[index_of(p)] == 0) problems.push_back(fmt::format("missing conductor for phase {}", phase_name(p)));
            if (seen[index_of(p)] > 1) problems.push_back(fmt::format("duplicate conductor for phase {}", phase_name(p)));
        }
        std::sort(layout.conductors.begin(), layout.conductors.end(),
                  [](const ConductorSpan& l, const ConductorSpan& r) { return l.phase < r.phase; });
    }

    double lowest = std::numeric_limits<double>::infinity();
    double shortest_span = std::numeric_limits<double>::infinity();
    for (const auto& c : layout.conductors) {
        const auto name = phase_name(c.phase);
        const bool finite = std::isfinite(c.x_offset) && std::isfinite(c.end_height) && std::isfinite(c.sag) &&
                            std::isfinite(c.span_length) && std::isfinite(c.total_length);
        if (!finite) {
            problems.push_back(fmt::format("conductor {}: non-finite geometry value", name));
            continue;
        }
        if (c.span_length <= 0.0) problems.push_back(fmt::format("conductor {}: span_length must be > 0", name));
        if (c.sag < 0.0) problems.push_back(fmt::format("conductor {}: sag must be >= 0", name));
        if (c.end_height <= 0.0) problems.push_back(fmt::format("conductor {}: end_height must be > 0", name));
        if (c.sag >= c.end_height)
            problems.push_back(fmt::format("conductor {}: conductor below ground (sag {} >= end_height {})", name,
                                           c.sag, c.end_height));
        if (c.span_length > 0.0 && !is_integer_multiple(c.total_length, c.span_length))
            problems.push_back(fmt::format(
                "conductor {}: total_length {} is not a positive integer multiple of span_length {}", name,
                c.total_length, c.span_length));
        lowest = std::min(lowest, c.end_height - std::max(c.sag, 0.0));
        if (c.span_length > 0.0) shortest_span = std::min(shortest_span, c.span_length);
    }

    if (layout.heads.size() < 2)
        problems.push_back(fmt::format("expected at least 2 sensor heads, got {}", layout.heads.size()));
    for (std::size_t i = 0; i < layout.heads.size(); ++i) {
        const auto& h = layout.heads[i];
        const auto& p = h.position;
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            problems.push_back(fmt::format("head {}: non-finite position", h.id));
            continue;
        }
        if (p.z >= lowest)
            problems.push_back(fmt::format(
                "head {}: sensor above a conductor (z = {} must be below the lowest conductor point {})", h.id, p.z,
                lowest));
        for (std::size_t j = 0; j < i; ++j) {
            if (layout.heads[j].id == h.id) problems.push_back(fmt::format("duplicate head id {}", h.id));
            if (layout.heads[j].position == p)
                problems.push_back(fmt::format("duplicate head positions (degenerate sensor placement): {} and {}",
                                               layout.heads[j].id, h.id));
        }
    }

    if (!(layout.step > 0.0) || !std::isfinite(layout.step)) {
        problems.push_back(fmt::format("step must be > 0, got {}", layout.step));
    } else if (std::isfinite(shortest_span) && layout.step > shortest_span / 10.0) {
        problems.push_back(fmt::format("step {} exceeds span_length/10 = {}", layout.step, shortest_span / 10.0));
    }

    if (!problems.empty()) throw ValidationError(std::move(problems));
    return ValidatedLayout(std::move(layout));
}

FacilityLayout default_layout() {
    FacilityLayout layout;
    const std::array<double, 4> offsets{-0.45, -0.15, 0.15, 0.45};
    const std::array<double, 4> sags{0.08, 0.08, 0.08, 0.06};
    for (Phase p : kPhases) {
        layout.conductors.push_back(ConductorSpan{.phase = p,
                                                  .x_offset = offsets[index_of(p)],
                                                  .end_height = 2.5,
                                                  .sag = sags[index_of(p)],
                                                  .span_length = 3.0,
                                                  .total_length = 6.0});
    }
    layout.heads = {{"Head1", {0.0, 3.0, 1.6}}, {"Head2", {0.0, 3.0, 1.2}}};
    layout.step = 0.01;
    return layout;
}

FacilityLayout near_field_layout() {
    FacilityLayout layout = default_layout();
    layout.heads = {{"Head1", {-0.29, 3.0, 2.39}}, {"Head2", {0.29, 3.0, 2.39}}};
    return layout;
}

}  // namespace linesense::geometry
