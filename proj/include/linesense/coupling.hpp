#pragma once

// Cross-coupled coefficient matrix, its inverse, and current recovery.
//
// Rows are field components (bx1, bz1, bx2, bz2, ...), columns are phases
// (A, B, C, N). Entries are geometry-only (1/m); the mu0/4pi factor is applied
// by the forward model and 4pi/mu0 by recover_currents.

#include "linesense/fieldmodel.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace linesense::coupling {

inline constexpr double kDefaultConditionLimit = 1e6;

using CoefficientMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4>;
using InverseMatrix = Eigen::Matrix<double, 4, Eigen::Dynamic>;

struct CouplingMatrix {
    CoefficientMatrix entries;

    std::size_t head_count() const { return static_cast<std::size_t>(entries.rows()) / 2; }
    static std::vector<std::string> row_labels(std::size_t heads);
};

struct InverseCouplingMatrix {
    InverseMatrix entries;          // m
    double condition_number = 1.0;  // 2-norm
    bool least_squares = false;     // true when more than 2 heads (pseudo-inverse)
};

CouplingMatrix build_coupling_matrix(const field::FieldModel& model);
CouplingMatrix build_coupling_matrix(const geometry::ValidatedLayout& layout);

// 2-norm condition number; +inf when rank deficient.
double condition_number(const CouplingMatrix& matrix);

// Exact inverse for 4x4, Moore-Penrose pseudo-inverse for taller matrices.
// Throws DegenerateError when rank deficient and IllConditionedError when the
// condition number exceeds cond_limit.
InverseCouplingMatrix invert(const CouplingMatrix& matrix, double cond_limit = kDefaultConditionLimit);

// I = (4pi/mu0) * inv * b.
field::PhaseCurrents recover_currents(const InverseCouplingMatrix& inv, const field::FieldSample& sample);
// Same, for any head count; components in row order.
field::PhaseCurrents recover_currents(const InverseCouplingMatrix& inv, double t, std::span<const double> components);

struct HeadSensitivity {
    std::string head;
    // Field per ampere on this head's x and z axes, worst phase, T/A.
    double max_bx_per_amp = 0.0;
    double max_bz_per_amp = 0.0;
};

struct ConditionReport {
    double condition_number = 0.0;  // +inf when singular
    bool singular = false;
    // Worst-case current error per tesla of field error, A/T (4pi/mu0 * ||C^-1||_2).
    double max_amps_per_tesla = 0.0;
    std::vector<HeadSensitivity> heads;
};

ConditionReport condition_report(const geometry::ValidatedLayout& layout);
ConditionReport condition_report(const field::FieldModel& model);

}  // namespace linesense::coupling
