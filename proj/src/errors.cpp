#include "linesense/errors.hpp"

#include <fmt/format.h>

namespace linesense {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
        if (!out.empty()) out += "; ";
        out += p;
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

ValidationError::ValidationError(std::string problem)
    : ValidationError(std::vector<std::string>{std::move(problem)}) {}

IllConditionedError::IllConditionedError(double condition_number, double limit)
    : NumericError(fmt::format("ill-conditioned placement: condition number {:.6g} exceeds limit {:.6g}; "
                               "move the sensor heads apart",
                               condition_number, limit)),
      condition_number_(condition_number),
      limit_(limit) {}

ParseError::ParseError(const std::string& message, std::size_t line)
    : Error(fmt::format("line {}: {}", line, message)), line_(line) {}

IoError::IoError(const std::string& message, std::string path)
    : Error(fmt::format("{}: {}", path, message)), path_(std::move(path)) {}

}  // namespace linesense
