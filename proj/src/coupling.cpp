#include "linesense/coupling.hpp"

#include "linesense/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace linesense::coupling {

namespace {

Eigen::VectorXd singular_values(const CoefficientMatrix& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues();
}

// Relative threshold below which a singular value counts as zero.
bool rank_deficient(const Eigen::VectorXd& sv, Eigen::Index rows) {
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (!(smax > 0.0)) return true;
    const double tol = static_cast<double>(rows) * std::numeric_limits<double>::epsilon() * smax * 16.0;
    return smin <= tol;
}

}  // namespace

std::vector<std::string> CouplingMatrix::row_labels(std::size_t heads) {
    std::vector<std::string> labels;
    for (std::size_t h = 1; h <= heads; ++h) {
        labels.push_back(fmt::format("bx{}", h));
        labels.push_back(fmt::format("bz{}", h));
    }
    return labels;
}

CouplingMatrix build_coupling_matrix(const field::FieldModel& model) {
    CouplingMatrix m;
    m.entries.resize(static_cast<Eigen::Index>(2 * model.head_count()), 4);
    for (std::size_t h = 0; h < model.head_count(); ++h) {
        for (Phase p : kPhases) {
            const auto& c = model.coefficient(h, p);
            m.entries(static_cast<Eigen::Index>(2 * h), static_cast<Eigen::Index>(index_of(p))) = c.cx;
            m.entries(static_cast<Eigen::Index>(2 * h + 1), static_cast<Eigen::Index>(index_of(p))) = c.cz;
        }
    }
    return m;
}

CouplingMatrix build_coupling_matrix(const geometry::ValidatedLayout& layout) {
    return build_coupling_matrix(field::FieldModel(layout));
}

double condition_number(const CouplingMatrix& matrix) {
    const auto sv = singular_values(matrix.entries);
    if (rank_deficient(sv, matrix.entries.rows())) return std::numeric_limits<double>::infinity();
    return sv(0) / sv(sv.size() - 1);
}

InverseCouplingMatrix invert(const CouplingMatrix& matrix, double cond_limit) {
    const auto& c = matrix.entries;
    if (c.rows() < 4 || c.rows() % 2 != 0)
        throw ValidationError(fmt::format("coupling matrix needs an even row count >= 4, got {}", c.rows()));
    if (!c.allFinite()) throw NumericError("coupling matrix has non-finite entries");

    const auto sv = singular_values(c);
    if (rank_deficient(sv, c.rows()))
        throw DegenerateError("degenerate sensor placement: coupling matrix is singular (co-located or redundant heads)");
    const double cond = sv(0) / sv(sv.size() - 1);
    if (cond > cond_limit) throw IllConditionedError(cond, cond_limit);

    InverseCouplingMatrix inv;
    inv.condition_number = cond;
    if (c.rows() == 4) {
        const Eigen::Matrix4d square = c;
        inv.entries = Eigen::FullPivLU<Eigen::Matrix4d>(square).inverse();
    } else {
        inv.least_squares = true;
        inv.entries = c.completeOrthogonalDecomposition().pseudoInverse();
    }
    return inv;
}

field::PhaseCurrents recover_currents(const InverseCouplingMatrix& inv, double t, std::span<const double> components) {
    if (static_cast<Eigen::Index>(components.size()) != inv.entries.cols())
        throw ValidationError(fmt::format("expected {} field components, got {}", inv.entries.cols(), components.size()));
    std::array<double, 4> i{};
    for (Eigen::Index r = 0; r < 4; ++r) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < inv.entries.cols(); ++k) acc += inv.entries(r, k) * components[k];
        i[static_cast<std::size_t>(r)] = kFourPiOverMu0 * acc;
    }
    return field::PhaseCurrents::from_values(t, i);
}

field::PhaseCurrents recover_currents(const InverseCouplingMatrix& inv, const field::FieldSample& sample) {
    const auto b = sample.components();
    return recover_currents(inv, sample.t, b);
}

ConditionReport condition_report(const field::FieldModel& model) {
    const auto matrix = build_coupling_matrix(model);
    const auto sv = singular_values(matrix.entries);

    ConditionReport report;
    report.singular = rank_deficient(sv, matrix.entries.rows());
    report.condition_number =
        report.singular ? std::numeric_limits<double>::infinity() : sv(0) / sv(sv.size() - 1);
    report.max_amps_per_tesla =
        report.singular ? std::numeric_limits<double>::infinity() : kFourPiOverMu0 / sv(sv.size() - 1);

    const auto& heads = model.layout().layout().heads;
    for (std::size_t h = 0; h < model.head_count(); ++h) {
        HeadSensitivity s{heads[h].id};
        for (Phase p : kPhases) {
            const auto& c = model.coefficient(h, p);
            s.max_bx_per_amp = std::max(s.max_bx_per_amp, kMu0Over4Pi * std::abs(c.cx));
            s.max_bz_per_amp = std::max(s.max_bz_per_amp, kMu0Over4Pi * std::abs(c.cz));
        }
        report.heads.push_back(std::move(s));
    }
    return report;
}

ConditionReport condition_report(const geometry::ValidatedLayout& layout) {
    return condition_report(field::FieldModel(layout));
}

}  // namespace linesense::coupling
