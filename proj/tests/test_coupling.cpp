#include "doctest.h"

#include "linesense/coupling.hpp"
#include "linesense/errors.hpp"

#include <cmath>
#include <random>

using namespace linesense;
using namespace linesense::coupling;

namespace {

const field::FieldModel& default_model() {
    static const field::FieldModel model(geometry::validate_layout(geometry::default_layout()));
    return model;
}

CouplingMatrix diag(double a, double b, double c, double d) {
    CouplingMatrix m;
    m.entries = CoefficientMatrix::Zero(4, 4);
    m.entries(0, 0) = a;
    m.entries(1, 1) = b;
    m.entries(2, 2) = c;
    m.entries(3, 3) = d;
    return m;
}

}  // namespace

TEST_CASE("row labels follow head order") {
    const auto labels = CouplingMatrix::row_labels(2);
    REQUIRE(labels.size() == 4);
    CHECK(labels[0] == "bx1");
    CHECK(labels[1] == "bz1");
    CHECK(labels[2] == "bx2");
    CHECK(labels[3] == "bz2");
}

TEST_CASE("coupling matrix entries equal field coefficients") {
    const auto& model = default_model();
    const auto m = build_coupling_matrix(model);
    REQUIRE(m.entries.rows() == 4);
    for (std::size_t h = 0; h < 2; ++h) {
        for (Phase p : kPhases) {
            const auto col = static_cast<Eigen::Index>(index_of(p));
            const auto direct = field::field_coefficient(model.polyline(p), model.layout().layout().heads[h].position);
            CHECK(m.entries(static_cast<Eigen::Index>(2 * h), col) == direct.cx);
            CHECK(m.entries(static_cast<Eigen::Index>(2 * h + 1), col) == direct.cz);
        }
    }
    CHECK(m.entries.allFinite());
    CHECK((m.entries.row(0) - m.entries.row(2)).norm() > 0.0);
    CHECK((m.entries.row(1) - m.entries.row(3)).norm() > 0.0);
}

TEST_CASE("column j is the field of conductor j alone") {
    const auto& model = default_model();
    const auto m = build_coupling_matrix(model);
    for (Phase p : kPhases) {
        std::array<double, 4> i{};
        i[index_of(p)] = 5.0;
        const auto b = field::forward_field(model, field::PhaseCurrents::from_values(0.0, i)).components();
        for (Eigen::Index r = 0; r < 4; ++r)
            CHECK(b[static_cast<std::size_t>(r)] ==
                  doctest::Approx(kMu0Over4Pi * 5.0 * m.entries(r, static_cast<Eigen::Index>(index_of(p)))).epsilon(1e-14));
    }
}

TEST_CASE("diagonal matrix inverts exactly with condition number 1") {
    const auto inv = invert(diag(2, 2, 2, 2));
    CHECK(inv.condition_number == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(inv.least_squares);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) CHECK(inv.entries(r, c) == (r == c ? 0.5 : 0.0));
    CHECK(condition_number(diag(1, 2, 3, 4)) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("default layout inverse multiplies back to identity") {
    const auto m = build_coupling_matrix(default_model());
    const auto inv = invert(m);
    const Eigen::Matrix4d product = m.entries * inv.entries;
    const double err = (product - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff();
    CHECK(err < 1e-10);
    CHECK(inv.condition_number >= 1.0);
    CHECK(std::isfinite(inv.condition_number));
}

TEST_CASE("duplicated rows are singular, never a garbage inverse") {
    CouplingMatrix m = build_coupling_matrix(default_model());
    m.entries.row(2) = m.entries.row(0);
    m.entries.row(3) = m.entries.row(1);
    CHECK(condition_number(m) == std::numeric_limits<double>::infinity());
    try {
        invert(m);
        FAIL("expected DegenerateError");
    } catch (const DegenerateError& e) {
        CHECK(std::string(e.what()).find("degenerate sensor placement") != std::string::npos);
    }
}

TEST_CASE("condition limit turns into an actionable error") {
    const auto m = build_coupling_matrix(default_model());
    try {
        invert(m, 10.0);
        FAIL("expected IllConditionedError");
    } catch (const IllConditionedError& e) {
        CHECK(e.limit() == 10.0);
        CHECK(e.condition_number() > 10.0);
        CHECK(std::string(e.what()).find("ill-conditioned placement") != std::string::npos);
        CHECK(std::string(e.what()).find("move the sensor heads apart") != std::string::npos);
    }
}

TEST_CASE("round trip for a fixed current vector") {
    const auto& model = default_model();
    const auto inv = invert(build_coupling_matrix(model));
    const field::PhaseCurrents truth{0.25, 10.0, -5.0, 3.0, -8.0};
    const auto got = recover_currents(inv, field::forward_field(model, truth));
    CHECK(got.t == 0.25);
    CHECK(std::abs(got.i_a - 10.0) < 1e-9);
    CHECK(std::abs(got.i_b + 5.0) < 1e-9);
    CHECK(std::abs(got.i_c - 3.0) < 1e-9);
    CHECK(std::abs(got.i_n + 8.0) < 1e-9);
}

TEST_CASE("round trip over 200 random current vectors") {
    const auto& model = default_model();
    const auto inv = invert(build_coupling_matrix(model));
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const field::PhaseCurrents truth{0.0, u(rng), u(rng), u(rng), u(rng)};
        const auto got = recover_currents(inv, field::forward_field(model, truth)).values();
        const auto want = truth.values();
        for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("recovery is linear and maps zero to zero") {
    const auto inv = invert(build_coupling_matrix(default_model()));
    const auto zero = recover_currents(inv, field::FieldSample{});
    for (double v : zero.values()) CHECK(v == 0.0);
    const field::FieldSample b{0.0, 1e-6, -2e-6, 3e-7, 5e-7};
    const field::FieldSample b3{0.0, 3e-6, -6e-6, 9e-7, 1.5e-6};
    const auto i1 = recover_currents(inv, b).values();
    const auto i3 = recover_currents(inv, b3).values();
    for (std::size_t k = 0; k < 4; ++k) CHECK(i3[k] == doctest::Approx(3.0 * i1[k]).epsilon(1e-13));
}

TEST_CASE("mu0/4pi factors cancel end to end") {
    const auto m = build_coupling_matrix(default_model());
    const auto inv = invert(m);
    const Eigen::Matrix4d composed = (kFourPiOverMu0 * inv.entries) * (kMu0Over4Pi * m.entries);
    CHECK((composed - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("co-located heads are rejected before a matrix exists") {
    auto layout = geometry::default_layout();
    layout.heads[1].position = layout.heads[0].position;
    CHECK_THROWS_AS(geometry::validate_layout(layout), ValidationError);
}

TEST_CASE("nearly co-located heads: singular or badly conditioned") {
    auto layout = geometry::default_layout();
    layout.heads[1].position = {0.0, 3.0, 1.6 + 1e-9};
    const auto report = condition_report(geometry::validate_layout(layout));
    CHECK((report.singular || report.condition_number > 1e6));
}

TEST_CASE("separated heads condition better than nearly co-located ones") {
    auto close = geometry::default_layout();
    close.heads[1].position = {0.0, 3.0, 1.59};
    auto apart = geometry::default_layout();
    apart.heads = {{"Head1", {-0.3, 3.0, 2.3}}, {"Head2", {0.3, 3.0, 1.0}}};
    const auto rc = condition_report(geometry::validate_layout(close));
    const auto ra = condition_report(geometry::validate_layout(apart));
    CHECK(ra.condition_number < rc.condition_number);
}

TEST_CASE("condition report summarizes the default layout") {
    const auto report = condition_report(default_model());
    CHECK_FALSE(report.singular);
    CHECK(report.condition_number == doctest::Approx(condition_number(build_coupling_matrix(default_model()))));
    CHECK(report.condition_number >= 1.0);
    CHECK(report.max_amps_per_tesla > 0.0);
    REQUIRE(report.heads.size() == 2);
    CHECK(report.heads[0].head == "Head1");
    // Head1 sits closer to the conductors than Head2
    CHECK(report.heads[0].max_bx_per_amp > report.heads[1].max_bx_per_amp);
}

TEST_CASE("worst-case amplification bounds the recovered error") {
    const auto& model = default_model();
    const auto inv = invert(build_coupling_matrix(model));
    const auto report = condition_report(model);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1e-7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::array<double, 4> e{n(rng), n(rng), n(rng), n(rng)};
        const auto di = recover_currents(inv, 0.0, e).values();
        const double in = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + e[3] * e[3]);
        const double out = std::sqrt(di[0] * di[0] + di[1] * di[1] + di[2] * di[2] + di[3] * di[3]);
        CHECK(out <= report.max_amps_per_tesla * in * (1.0 + 1e-12));
    }
}

TEST_CASE("more than two heads uses the pseudo-inverse") {
    auto layout = geometry::default_layout();
    layout.heads.push_back({"Head3", {0.35, 3.0, 1.9}});
    const field::FieldModel model(geometry::validate_layout(layout));
    const auto m = build_coupling_matrix(model);
    REQUIRE(m.entries.rows() == 6);
    const auto inv = invert(m);
    CHECK(inv.least_squares);
    const field::PhaseCurrents truth{0.0, 4.0, -1.0, 2.5, -5.5};
    const auto b = model.forward_components(truth);
    const auto got = recover_currents(inv, 0.0, b).values();
    const auto want = truth.values();
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-8);
    CHECK_THROWS_AS(recover_currents(inv, 0.0, std::span<const double>(b).first(4)), ValidationError);
}
