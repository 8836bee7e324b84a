#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace linesense::csv {

// Comma-split line reader. Blank lines are skipped; CR is stripped.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::optional<std::vector<std::string>> next();
    // 1-based line number of the last row returned.
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
    std::string buffer_;
};

std::vector<std::string> split(std::string_view line);

// Throws ParseError carrying `line` on malformed input.
double parse_double(std::string_view text, std::size_t line);

}  // namespace linesense::csv
