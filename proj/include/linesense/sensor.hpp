#pragma once

// GMR and Hall transducer models: MFDF voltage/field transfer, solenoid
// calibration fitting, and error injection (axis misalignment, noise, offset).

#include "linesense/fieldmodel.hpp"

#include <iosfwd>
#include <random>
#include <utility>
#include <vector>

namespace linesense::sensor {

// Magnetic flux density factor, T/V: 1 / (((v_op * s_ns) / 100) * 1e3) with
// s_ns in mV/V-Oe. 8 V * 12.5 mV/V-Oe = 100 mV/Oe = 1e3 V/T -> 1e-3 T/V.
double mfdf(double operating_voltage, double sensitivity);

struct GmrSpec {
    double sensitivity = 12.5;      // mV/V-Oe
    double operating_voltage = 8.0; // V
    double misalignment = 0.0;      // rad, sensing-axis rotation in the x-z plane
    double noise_rms = 0.0;         // T
    double offset = 0.0;            // T, stands in for hysteresis

    double mfdf() const { return sensor::mfdf(operating_voltage, sensitivity); }
    // Device output at maximum applied field: 40 mV/V times the supply.
    double full_scale_volts() const { return 0.040 * operating_voltage; }
};

struct HallSpec {
    double sensitivity = 32.0;  // mV/A
};

double voltage_to_field(double volts, const GmrSpec& spec);

// Inverse transfer. Adds offset and, when rng is given and noise_rms > 0,
// gaussian noise (both expressed in tesla before conversion).
double field_to_voltage(double tesla, const GmrSpec& spec, std::mt19937_64* rng = nullptr);

bool exceeds_full_scale(double volts, const GmrSpec& spec);

// Per head, rotate (bx, bz) by theta: bx' = bx cos + bz sin, bz' = -bx sin + bz cos.
field::FieldSample apply_misalignment(const field::FieldSample& sample, double theta1, double theta2);

// What a single-axis sensor on channel k (0..3 = bx1, bz1, bx2, bz2) reads
// when its axis is rotated by theta. Matches apply_misalignment when both
// channels of a head share theta.
double sensed_component(const field::FieldSample& sample, std::size_t channel, double theta);

double solenoid_field(double turns_per_meter, double current);

double hall_voltage_to_current(double volts, const HallSpec& spec);
double hall_current_to_voltage(double amps, const HallSpec& spec);

struct SweepPoint {
    double applied_oe = 0.0;
    double volts = 0.0;
};

struct CalibrationOptions {
    double r2_min = 0.999;
    std::size_t min_points = 5;
    double max_slope_deviation = 0.01;  // relative, head vs tail of the window
    double band_low = 11.0;             // mV/V-Oe
    double band_high = 18.0;
};

struct CalibrationSweep {
    std::vector<SweepPoint> points;
    double fitted_sensitivity = 0.0;  // mV/V-Oe
    double slope = 0.0;               // V/Oe over the linear region
    double intercept = 0.0;           // V
    double r_squared = 0.0;
    std::pair<double, double> linear_region{0.0, 0.0};  // Oe
    std::size_t region_points = 0;
};

// Fits the longest contiguous non-negative-field window that is linear
// (R^2 >= r2_min, head and tail slopes agree) and converts its slope to
// mV/V-Oe. Throws ValidationError("no linear region found") or when the
// result leaves the plausibility band.
CalibrationSweep fit_sensitivity(std::vector<SweepPoint> points, double v_op, const CalibrationOptions& options = {});

struct SolenoidSweepSettings {
    double turns_per_meter = 1000.0;
    double current_min = -0.1;  // A
    double current_max = 0.1;
    std::size_t points = 41;
    double slope_v_per_oe = 0.12;
    double intercept_v = 0.0;
    double noise_v = 0.0;
    // > 0: output follows sat * tanh(slope * B / sat) instead of a line.
    double saturation_v = 0.0;
};

// Synthetic solenoid sweep for calibration tests and demos.
std::vector<SweepPoint> make_solenoid_sweep(const SolenoidSweepSettings& settings, std::mt19937_64* rng = nullptr);

// CSV with header `applied_oe,volts`.
std::vector<SweepPoint> read_sweep_csv(std::istream& in);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

}  // namespace linesense::sensor
