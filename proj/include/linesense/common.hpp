#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string_view>

namespace linesense {

// Vacuum permeability, T*m/A.
inline constexpr double kMu0 = 4.0 * std::numbers::pi * 1e-7;
// mu0 / 4pi and its reciprocal, kept exact rather than derived from kMu0.
inline constexpr double kMu0Over4Pi = 1e-7;
inline constexpr double kFourPiOverMu0 = 1e7;

// 1 Oe corresponds to 1e-4 T in air.
inline constexpr double kTeslaPerOersted = 1e-4;

constexpr double oersted_to_tesla(double oe) { return oe * kTeslaPerOersted; }
constexpr double tesla_to_oersted(double t) { return t / kTeslaPerOersted; }
constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

enum class Phase { A = 0, B = 1, C = 2, N = 3 };

inline constexpr std::array<Phase, 4> kPhases{Phase::A, Phase::B, Phase::C, Phase::N};

constexpr std::string_view phase_name(Phase p) {
    switch (p) {
    case Phase::A: return "A";
    case Phase::B: return "B";
    case Phase::C: return "C";
    case Phase::N: return "N";
    }
    return "?";
}

constexpr std::size_t index_of(Phase p) { return static_cast<std::size_t>(p); }

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend constexpr Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Point3 operator*(double s, Point3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend constexpr bool operator==(Point3, Point3) = default;
};

constexpr double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Point3 cross(Point3 a, Point3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(Point3 a) { return std::sqrt(dot(a, a)); }

}  // namespace linesense
