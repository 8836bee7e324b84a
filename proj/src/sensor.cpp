#include "linesense/sensor.hpp"

#include "linesense/csv.hpp"
#include "linesense/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace linesense::sensor {

double mfdf(double operating_voltage, double sensitivity) {
    if (!(operating_voltage > 0.0) || !std::isfinite(operating_voltage))
        throw ValidationError(fmt::format("operating voltage must be > 0, got {}", operating_voltage));
    if (!(sensitivity > 0.0) || !std::isfinite(sensitivity))
        throw ValidationError(fmt::format("GMR sensitivity must be > 0, got {}", sensitivity));
    return 1.0 / (((operating_voltage * sensitivity) / 100.0) * 1e3);
}

double voltage_to_field(double volts, const GmrSpec& spec) { return volts * spec.mfdf(); }

double field_to_voltage(double tesla, const GmrSpec& spec, std::mt19937_64* rng) {
    double b = tesla + spec.offset;
    if (rng != nullptr && spec.noise_rms > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_rms);
        b += noise(*rng);
    }
    return b / spec.mfdf();
}

bool exceeds_full_scale(double volts, const GmrSpec& spec) { return std::abs(volts) > spec.full_scale_volts(); }

field::FieldSample apply_misalignment(const field::FieldSample& sample, double theta1, double theta2) {
    auto rotate = [](double bx, double bz, double theta) {
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        return std::pair{bx * c + bz * s, -bx * s + bz * c};
    };
    field::FieldSample out = sample;
    std::tie(out.bx1, out.bz1) = rotate(sample.bx1, sample.bz1, theta1);
    std::tie(out.bx2, out.bz2) = rotate(sample.bx2, sample.bz2, theta2);
    return out;
}

double sensed_component(const field::FieldSample& sample, std::size_t channel, double theta) {
    const auto b = sample.components();
    const std::size_t head = channel / 2;
    const double bx = b[2 * head];
    const double bz = b[2 * head + 1];
    if (theta == 0.0) return b[channel];
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return channel % 2 == 0 ? bx * c + bz * s : -bx * s + bz * c;
}

double solenoid_field(double turns_per_meter, double current) {
    if (!(turns_per_meter > 0.0)) throw ValidationError(fmt::format("turns_per_meter must be > 0, got {}", turns_per_meter));
    return kMu0 * turns_per_meter * current;
}

double hall_voltage_to_current(double volts, const HallSpec& spec) { return volts / (spec.sensitivity / 1000.0); }

double hall_current_to_voltage(double amps, const HallSpec& spec) { return amps * (spec.sensitivity / 1000.0); }

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_se = 0.0;
    bool valid = false;
};

// Running sums so any window [first, last] fits in O(1).
class PrefixSums {
public:
    explicit PrefixSums(const std::vector<SweepPoint>& pts) : x_(pts.size() + 1), y_(x_), xx_(x_), xy_(x_), yy_(x_) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double x = pts[i].applied_oe;
            const double y = pts[i].volts;
            x_[i + 1] = x_[i] + x;
            y_[i + 1] = y_[i] + y;
            xx_[i + 1] = xx_[i] + x * x;
            xy_[i + 1] = xy_[i] + x * y;
            yy_[i + 1] = yy_[i] + y * y;
        }
    }

    LineFit fit(std::size_t first, std::size_t last) const {
        const auto n = static_cast<double>(last - first + 1);
        const double sx = x_[last + 1] - x_[first];
        const double sy = y_[last + 1] - y_[first];
        const double sxx = xx_[last + 1] - xx_[first] - sx * sx / n;
        const double sxy = xy_[last + 1] - xy_[first] - sx * sy / n;
        const double syy = yy_[last + 1] - yy_[first] - sy * sy / n;
        LineFit f;
        if (!(sxx > 0.0) || !(syy > 0.0)) return f;
        f.slope = sxy / sxx;
        f.intercept = (sy - f.slope * sx) / n;
        const double ss_res = std::max(syy - f.slope * sxy, 0.0);
        f.r_squared = 1.0 - ss_res / syy;
        f.slope_se = n > 2.0 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
        f.valid = true;
        return f;
    }

private:
    std::vector<double> x_, y_, xx_, xy_, yy_;
};

}  // namespace

CalibrationSweep fit_sensitivity(std::vector<SweepPoint> points, double v_op, const CalibrationOptions& options) {
    if (!(v_op > 0.0)) throw ValidationError(fmt::format("operating voltage must be > 0, got {}", v_op));
    if (points.size() < 10) throw ValidationError(fmt::format("calibration needs >= 10 points, got {}", points.size()));
    for (const auto& p : points)
        if (!std::isfinite(p.applied_oe) || !std::isfinite(p.volts))
            throw ValidationError("calibration sweep contains non-finite values");
    std::sort(points.begin(), points.end(),
              [](const SweepPoint& l, const SweepPoint& r) { return l.applied_oe < r.applied_oe; });
    if (!(points.front().applied_oe < 0.0 && points.back().applied_oe > 0.0))
        throw ValidationError("calibration sweep must span both negative and positive fields");

    std::vector<SweepPoint> positive;
    std::copy_if(points.begin(), points.end(), std::back_inserter(positive),
                 [](const SweepPoint& p) { return p.applied_oe >= 0.0; });

    const std::size_t k = std::max<std::size_t>(options.min_points, 3);
    const PrefixSums sums(positive);

    std::size_t best_first = 0;
    std::size_t best_len = 0;
    LineFit best;
    for (std::size_t first = 0; first + k <= positive.size(); ++first) {
        for (std::size_t last = first + k - 1; last < positive.size(); ++last) {
            const std::size_t len = last - first + 1;
            if (len <= best_len) continue;
            const LineFit whole = sums.fit(first, last);
            if (!whole.valid || whole.slope <= 0.0 || whole.r_squared < options.r2_min) continue;
            const LineFit head = sums.fit(first, first + k - 1);
            const LineFit tail = sums.fit(last - k + 1, last);
            if (!head.valid || !tail.valid) continue;
            const double deviation = std::abs(tail.slope - head.slope);
            const double allowed = std::max(options.max_slope_deviation * whole.slope,
                                             3.0 * std::hypot(head.slope_se, tail.slope_se));
            if (deviation > allowed) continue;
            best_first = first;
            best_len = len;
            best = whole;
        }
    }
    if (best_len == 0) throw ValidationError("no linear region found in calibration sweep");

    CalibrationSweep sweep;
    sweep.slope = best.slope;
    sweep.intercept = best.intercept;
    sweep.r_squared = best.r_squared;
    sweep.fitted_sensitivity = best.slope * 1000.0 / v_op;
    sweep.linear_region = {positive[best_first].applied_oe, positive[best_first + best_len - 1].applied_oe};
    sweep.region_points = best_len;
    sweep.points = std::move(points);

    if (sweep.fitted_sensitivity < options.band_low || sweep.fitted_sensitivity > options.band_high)
        throw ValidationError(fmt::format("fitted sensitivity {:.4f} mV/V-Oe outside plausibility band [{}, {}]",
                                          sweep.fitted_sensitivity, options.band_low, options.band_high));
    return sweep;
}

std::vector<SweepPoint> make_solenoid_sweep(const SolenoidSweepSettings& s, std::mt19937_64* rng) {
    if (s.points < 2) throw ValidationError("sweep needs at least 2 points");
    std::normal_distribution<double> noise(0.0, s.noise_v > 0.0 ? s.noise_v : 1.0);
    std::vector<SweepPoint> out;
    out.reserve(s.points);
    for (std::size_t i = 0; i < s.points; ++i) {
        const double current = s.current_min + (s.current_max - s.current_min) * static_cast<double>(i) /
                                                   static_cast<double>(s.points - 1);
        const double oe = tesla_to_oersted(solenoid_field(s.turns_per_meter, current));
        double v = s.saturation_v > 0.0 ? s.saturation_v * std::tanh(s.slope_v_per_oe * oe / s.saturation_v)
                                        : s.slope_v_per_oe * oe;
        v += s.intercept_v;
        if (rng != nullptr && s.noise_v > 0.0) v += noise(*rng);
        out.push_back({oe, v});
    }
    return out;
}

std::vector<SweepPoint> read_sweep_csv(std::istream& in) {
    csv::LineReader reader(in);
    const auto header = reader.next();
    if (!header || *header != std::vector<std::string>{"applied_oe", "volts"})
        throw ParseError("expected header 'applied_oe,volts'", 1);
    std::vector<SweepPoint> points;
    while (auto row = reader.next()) {
        if (row->size() != 2) throw ParseError(fmt::format("expected 2 columns, got {}", row->size()), reader.line());
        points.push_back({csv::parse_double((*row)[0], reader.line()), csv::parse_double((*row)[1], reader.line())});
    }
    return points;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << "applied_oe,volts\n";
    for (const auto& p : points) fmt::print(out, "{:.17g},{:.17g}\n", p.applied_oe, p.volts);
}

}  // namespace linesense::sensor
